"""Pure-numpy simplex kernels.

Fallback backend used when the compiled extension is unavailable. Every
function here is the semantic twin of its counterpart in _kernels.pyx:
identical eligibility predicates, identical tie-breaking (first index
attaining the extremum), and identical floating-point expressions, so
both backends walk the same pivot sequence on the same problem.

Variable status codes shared with the solver:
0 = nonbasic at lower bound, 1 = nonbasic at upper bound,
2 = basic, 3 = fixed (lb == ub, never enters),
4 = nonbasic free at zero (box straddles 0; may enter in either
direction).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _scores(z, status):
    score = np.where(status == 0, -z, np.where(status == 1, z, -np.inf))
    return np.where(status == 4, np.abs(z), score)


def dantzig_price(z, status, tol):
    """Entering column with the most negative reduced-cost signal, or -1."""
    score = _scores(z, status)
    if score.shape[0] == 0:
        return -1
    j = int(np.argmax(score))
    return j if score[j] > tol else -1


def steepest_edge_price(z, status, tol, norms2):
    """Entering column maximizing z^2 / (1 + |column|^2), or -1.

    Eligibility still uses the raw reduced cost against tol, so the
    optimality verdict is identical to Dantzig pricing; only the choice
    among eligible columns changes.
    """
    raw = _scores(z, status)
    if raw.shape[0] == 0:
        return -1
    eligible = raw > tol
    if not eligible.any():
        return -1
    score = np.where(eligible, (z * z) / (1.0 + norms2), -np.inf)
    return int(np.argmax(score))


def bland_price(z, status, tol):
    """Lowest-index eligible entering column, or -1."""
    score = _scores(z, status)
    idx = np.nonzero(score > tol)[0]
    return int(idx[0]) if idx.shape[0] else -1


def ratio_test(col, beta, lb_b, ub_b, dirn, t_bound, piv_tol, bland, basis):
    """Step length and leaving row.

    Returns (t, r) where r == -1 means the entering variable flips to its
    opposite bound after step t; otherwise basic row r leaves. Ties on t
    prefer the bound flip, then the largest |pivot| (or the smallest basis
    variable index when `bland` is set).
    """
    m = col.shape[0]
    t_best = t_bound
    r = -1
    if m:
        rates = -dirn * col
        t_arr = np.full(m, np.inf)
        neg = rates < -piv_tol
        if neg.any():
            t_arr[neg] = (lb_b[neg] - beta[neg]) / rates[neg]
        pos = rates > piv_tol
        if pos.any():
            t_arr[pos] = (ub_b[pos] - beta[pos]) / rates[pos]
        np.maximum(t_arr, 0.0, out=t_arr)
        t_min = float(t_arr.min())
        if t_min < t_best:
            ties = np.nonzero(t_arr == t_min)[0]
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(col[ties]))])
            t_best = t_min
    return float(t_best), r


def pivot_update(T, r, j):
    """Gauss-Jordan elimination on column j with pivot row r, in place.

    T carries the constraint rows plus the trailing reduced-cost rows.
    """
    prow = T[r]
    prow /= prow[j]
    prow[j] = 1.0
    f = T[:, j].copy()
    f[r] = 0.0
    T -= np.outer(f, prow)
    T[:, j] = 0.0
    T[r, j] = 1.0
