"""Hot-kernel dispatch: the compiled extension when built, numpy otherwise.

Set ``HETCLOSE_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from hetclose import _kernels_py

BACKEND = "python"

if not os.environ.get("HETCLOSE_PURE_PYTHON"):
    try:
        from hetclose import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

hadamard_bits = _impl.hadamard_bits
central_z = _impl.central_z
uneven_stat = _impl.uneven_stat
max_sensitivity = _impl.max_sensitivity

__all__ = ["BACKEND", "hadamard_bits", "central_z", "uneven_stat", "max_sensitivity"]
