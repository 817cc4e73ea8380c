import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetclose import _kernels_py, kernels

compiled = pytest.importorskip("hetclose._kernels")


def test_backend_selected():
    assert kernels.BACKEND == "cython"
    assert kernels.central_z is compiled.central_z


def test_env_forces_fallback():
    env = dict(os.environ, HETCLOSE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from hetclose import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def sylvester_entry(i, j):
    return bin(i & j).count("1") % 2 == 0


def test_hadamard_bits_oracle():
    s = np.arange(64).repeat(64)
    c = np.tile(np.arange(64), 64)
    oracle = np.array([sylvester_entry(a, b) for a, b in zip(s, c)], dtype=np.uint8)
    assert np.array_equal(compiled.hadamard_bits(s, c), oracle)
    assert np.array_equal(_kernels_py.hadamard_bits(s, c), oracle)


@settings(max_examples=100)
@given(st.integers(0, 2**40), st.lists(st.integers(0, 2**40), min_size=1, max_size=50))
def test_hadamard_bits_broadcast_column(col, syms):
    s = np.array(syms)
    assert np.array_equal(compiled.hadamard_bits(s, col), _kernels_py.hadamard_bits(s, col))


def counts(k, rows=None):
    shape = (k,) if rows is None else (rows, k)
    return st.lists(st.integers(0, 50), min_size=int(np.prod(shape)), max_size=int(np.prod(shape))).map(
        lambda v: np.array(v, dtype=np.int64).reshape(shape)
    )


@settings(max_examples=100)
@given(st.integers(1, 12).flatmap(lambda k: st.tuples(*(counts(k, 3) for _ in range(4)))))
def test_central_z_agrees(hs):
    assert np.array_equal(compiled.central_z(*hs), _kernels_py.central_z(*hs))


@settings(max_examples=100)
@given(st.integers(1, 12).flatmap(lambda k: st.tuples(counts(k, 2), counts(k, 2))), st.integers(1, 500), st.integers(1, 500))
def test_uneven_stat_agrees(xy, n1, n2):
    x, y = xy
    a = compiled.uneven_stat(x, y, n1, n2)
    b = _kernels_py.uneven_stat(x, y, n1, n2)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-6)


@settings(max_examples=100)
@given(st.integers(2, 8).flatmap(lambda k: st.tuples(*(counts(k) for _ in range(4)))))
def test_max_sensitivity_agrees(hs):
    hs = [np.minimum(h, 5) for h in hs]
    assert compiled.max_sensitivity(*hs) == _kernels_py.max_sensitivity(*hs)
