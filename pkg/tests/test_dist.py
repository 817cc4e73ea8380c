from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetclose.dist import (
    Distribution,
    Histogram,
    PrivacyParams,
    SampleSet,
    TestVerdict,
    l2_distance_sq,
    majority_repeat,
    make_family,
    poisson_sample_count,
    sample,
    tv_distance,
)
from hetclose.rng import Rng, as_generator, spawn, trial_generator


def pmfs(min_k=2, max_k=12):
    """Random probability vectors built from positive integer weights."""
    return st.lists(st.integers(0, 50), min_size=min_k, max_size=max_k).filter(lambda w: sum(w) > 0).map(
        lambda w: Distribution(np.array(w, dtype=float) / sum(w))
    )


def test_distribution_rejects_bad_vectors():
    with pytest.raises(ValueError):
        Distribution([0.5, 0.6])
    with pytest.raises(ValueError):
        Distribution([1.2, -0.2])
    with pytest.raises(ValueError):
        Distribution([1.0])
    with pytest.raises(ValueError):
        Distribution([[0.5, 0.5]])
    with pytest.raises(ValueError):
        Distribution([np.nan, 1.0])


def test_distribution_is_not_renormalised():
    p = np.array([0.25, 0.25, 0.5])
    d = Distribution(p)
    assert np.array_equal(d.pmf, p)
    with pytest.raises(ValueError):
        d.pmf[0] = 0.3


def test_uniform_and_point_mass():
    assert np.allclose(Distribution.uniform(4).pmf, 0.25)
    pm = Distribution.point_mass(5, 2)
    assert pm.pmf.tolist() == [0, 0, 1, 0, 0]
    assert Distribution.uniform(3) == Distribution.uniform(3)
    assert hash(Distribution.uniform(3)) == hash(Distribution.uniform(3))


def test_privacy_params_validation():
    assert PrivacyParams(1.0).pure
    assert not PrivacyParams(1.0, 1e-6).pure
    with pytest.raises(ValueError):
        PrivacyParams(0.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0)


def test_tv_matches_exact_rational_oracle():
    p = [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    q = [Fraction(1, 8), Fraction(5, 8), Fraction(1, 4)]
    oracle = sum(abs(a - b) for a, b in zip(p, q)) / 2
    got = tv_distance(Distribution([float(x) for x in p]), Distribution([float(x) for x in q]))
    assert got == float(oracle) == 0.375


def test_tv_dimension_mismatch():
    with pytest.raises(ValueError):
        tv_distance(Distribution.uniform(2), Distribution.uniform(3))


def test_l2_distance_sq():
    assert l2_distance_sq([1.0, 0.0], [0.0, 0.0]) == 1.0
    assert l2_distance_sq(Distribution.uniform(2), Distribution([1.0, 0.0])) == pytest.approx(0.5)


@given(pmfs(3, 3), pmfs(3, 3), pmfs(3, 3))
def test_tv_is_a_metric(p, q, r):
    assert 0 <= tv_distance(p, q) <= 1
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p))
    assert tv_distance(p, p) == 0
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


@pytest.mark.parametrize("kind", ["paninski-far", "two-spike", "zipf"])
@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5])
def test_families_sit_at_distance_alpha(kind, alpha):
    p, q = make_family(kind, 16, alpha)
    assert tv_distance(p, q) == pytest.approx(alpha, abs=1e-12)


def test_two_spike_hand_built():
    p, q = make_family("two-spike", 4, 0.5)
    assert np.allclose(p.pmf, [0.625, 0.125, 0.125, 0.125])
    assert np.allclose(q.pmf, [0.125, 0.625, 0.125, 0.125])


def test_paninski_hand_built():
    p, q = make_family("paninski-far", 4, 0.25)
    assert np.allclose(p.pmf, 0.25)
    assert np.allclose(q.pmf, [0.375, 0.125, 0.375, 0.125])


def test_family_errors():
    with pytest.raises(ValueError):
        make_family("paninski-far", 5, 0.2)
    with pytest.raises(ValueError):
        make_family("paninski-far", 4, 0.6)
    with pytest.raises(ValueError):
        make_family("nope", 4, 0.2)
    with pytest.raises(ValueError):
        make_family("two-spike", 4, 0.0)
    u, v = make_family("uniform", 6, 0.3)
    assert u == v


def test_sample_frequencies_and_determinism():
    p = Distribution([0.1, 0.2, 0.7])
    s = sample(p, 100_000, Rng(7))
    freq = np.bincount(s.values, minlength=3) / len(s)
    se = np.sqrt(p.pmf * (1 - p.pmf) / len(s))
    assert np.all(np.abs(freq - p.pmf) < 4 * se)
    assert np.array_equal(sample(p, 50, Rng(7)).values, sample(p, 50, Rng(7)).values)
    assert len(sample(p, 0, Rng(1))) == 0
    with pytest.raises(ValueError):
        sample(p, -1, Rng(1))


def test_sample_set_and_histogram_validation():
    s = SampleSet([0, 2, 2], 3)
    assert s.histogram().counts.tolist() == [1, 0, 2]
    assert s.histogram().total == 3
    with pytest.raises(ValueError):
        SampleSet([3], 3)
    with pytest.raises(ValueError):
        Histogram([1, -1])
    with pytest.raises(ValueError):
        Histogram([1.5, 1])
    with pytest.raises(ValueError):
        Histogram([1, 1], total=3)
    assert Histogram([2.0, 1.0]).counts.dtype == np.int64


def test_poisson_sample_count_mean():
    gen = as_generator(Rng(3))
    draws = [poisson_sample_count(20.0, gen) for _ in range(4000)]
    assert abs(np.mean(draws) - 20.0) < 4 * np.sqrt(20.0 / 4000)


def test_rng_streams():
    a = Rng(5, 0).generator().random(3)
    assert np.array_equal(a, Rng(5, 0).generator().random(3))
    assert not np.array_equal(a, Rng(5, 1).generator().random(3))
    assert np.array_equal(trial_generator(1, 2, 3).random(2), trial_generator(1, 2, 3).random(2))
    assert not np.array_equal(trial_generator(1, 2, 3).random(2), trial_generator(1, 3, 2).random(2))
    kids = spawn(Rng(1).generator(), 3)
    assert len({k.random() for k in kids}) == 3
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(ValueError):
        Rng(1, -2)


def test_majority_repeat():
    always = lambda gen: TestVerdict(False)
    never = lambda gen: TestVerdict(True)
    assert majority_repeat(always, 3, Rng(0)).reject
    assert majority_repeat(never, 3, Rng(0)).accept
    with pytest.raises(ValueError):
        majority_repeat(always, 4, Rng(0))
    coin = lambda gen: TestVerdict(gen.random() < 0.5)
    a = majority_repeat(coin, 9, Rng(11))
    b = majority_repeat(coin, 9, Rng(11))
    assert a == b
    assert a.threshold == 0.5


def test_majority_amplifies():
    # each inner run rejects with probability 0.7; majority of 9 should reject far more often
    inner = lambda gen: TestVerdict(gen.random() >= 0.7)
    rate = np.mean([majority_repeat(inner, 9, trial_generator(0, 0, i)).reject for i in range(2000)])
    # exact binomial tail P(Bin(9, 0.7) >= 5)
    from math import comb

    oracle = sum(comb(9, j) * 0.7**j * 0.3 ** (9 - j) for j in range(5, 10))
    assert abs(rate - oracle) < 4 * np.sqrt(oracle * (1 - oracle) / 2000)
