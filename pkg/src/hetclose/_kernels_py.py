"""Pure numpy implementations of the hot kernels.

Used whenever the compiled ``_kernels`` extension is unavailable. Signatures
and results match the extension exactly.
"""

import numpy as np

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.uint64)
    return _POPCOUNT8[x.view(np.uint8)].reshape(x.shape + (8,)).sum(axis=-1)


def hadamard_bits(symbols, columns):
    """1 where the Sylvester Hadamard entry ``H[symbol, column]`` is +1."""
    symbols = np.asarray(symbols, dtype=np.int64)
    columns = np.asarray(columns, dtype=np.int64)
    return ((_popcount(symbols & columns) & 1) == 0).astype(np.uint8)


def central_z(x, x2, y, y2):
    """Row-wise sum over bins of |x-y| + |x2-y2| - |x-x2| - |y-y2|."""
    x, x2, y, y2 = (np.asarray(a, dtype=np.int64) for a in (x, x2, y, y2))
    z = np.abs(x - y) + np.abs(x2 - y2) - np.abs(x - x2) - np.abs(y - y2)
    return z.sum(axis=-1)


def uneven_stat(x, y, n1, n2):
    """Row-wise uneven-sample chi-square statistic; empty bins contribute 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    num = (n2 * x - n1 * y) ** 2 - n2 * n2 * x - n1 * n1 * y
    den = x + y
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return out.sum(axis=-1)


def max_sensitivity(x, x2, y, y2):
    """Largest |change of central_z| over all single-unit moves in one histogram."""
    hists = [np.asarray(a, dtype=np.int64).copy() for a in (x, x2, y, y2)]
    k = hists[0].size
    # bins touched by a move from i to j are i and j; the rest cancel
    best = 0
    src, dst = np.nonzero(~np.eye(k, dtype=bool))
    for h in range(4):
        movable = hists[h][src] > 0
        if not movable.any():
            continue
        i, j = src[movable], dst[movable]
        a, a2, b, b2 = hists
        before = _bin_terms(a, a2, b, b2, i) + _bin_terms(a, a2, b, b2, j)
        after = _bin_terms_shifted(hists, h, i, -1) + _bin_terms_shifted(hists, h, j, +1)
        best = max(best, int(np.abs(after - before).max()))
    return best


def _bin_terms(a, a2, b, b2, idx):
    return np.abs(a[idx] - b[idx]) + np.abs(a2[idx] - b2[idx]) - np.abs(a[idx] - a2[idx]) - np.abs(b[idx] - b2[idx])


def _bin_terms_shifted(hists, h, idx, step):
    vals = [arr[idx] for arr in hists]
    vals[h] = vals[h] + step
    a, a2, b, b2 = vals
    return np.abs(a - b) + np.abs(a2 - b2) - np.abs(a - a2) - np.abs(b - b2)
