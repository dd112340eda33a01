"""Two-dimensional Sobol low-discrepancy sequence (unscrambled, Gray-code order).

Dimension 1 is the base-2 van der Corput sequence; dimension 2 uses the
primitive polynomial x + 1 with initial direction number m_1 = 1. The zero point
is skipped, so the sequence starts (0.5, 0.5), (0.75, 0.25), (0.25, 0.75), ...
"""

import numpy as np

BITS = 32


def _direction_numbers():
    v = np.zeros((2, BITS), dtype=np.uint64)
    m = 1
    for k in range(BITS):
        v[0, k] = 1 << (BITS - 1 - k)
        if k > 0:
            m = (m << 1) ^ m
        v[1, k] = m << (BITS - 1 - k)
    return v


_V = _direction_numbers()


def sobol_points(n: int, dim: int = 2, skip: int = 1) -> np.ndarray:
    """First ``n`` points in [0, 1)^dim after skipping ``skip`` leading points."""
    if dim not in (1, 2):
        raise ValueError("only 1 or 2 dimensions are tabulated")
    if n < 0 or skip < 0:
        raise ValueError("n and skip must be non-negative")
    total = n + skip
    if total >= 2**BITS:
        raise ValueError("too many points for 32-bit direction numbers")
    out = np.empty((total, dim))
    x = np.zeros(dim, dtype=np.uint64)
    for i in range(total):
        out[i] = x.astype(float) / 2.0**BITS
        # position of the lowest zero bit of i
        c = (~i & (i + 1)).bit_length() - 1
        x ^= _V[:dim, c]
    return out[skip:]


def star_discrepancy(points: np.ndarray) -> float:
    """Exact star discrepancy of a 2D point set by enumerating critical boxes."""
    p = np.asarray(points, dtype=float)
    n = len(p)
    xs = np.unique(np.concatenate([p[:, 0], [1.0]]))
    ys = np.unique(np.concatenate([p[:, 1], [1.0]]))
    # counts of points in the open box [0,x)x[0,y) and the closed box [0,x]x[0,y]
    lt_x = p[:, 0][None, :] < xs[:, None]
    le_x = p[:, 0][None, :] <= xs[:, None]
    lt_y = p[:, 1][None, :] < ys[:, None]
    le_y = p[:, 1][None, :] <= ys[:, None]
    open_cnt = lt_x.astype(np.int64) @ lt_y.T.astype(np.int64)
    closed_cnt = le_x.astype(np.int64) @ le_y.T.astype(np.int64)
    vol = xs[:, None] * ys[None, :]
    return float(max(np.max(vol - open_cnt / n), np.max(closed_cnt / n - vol)))
