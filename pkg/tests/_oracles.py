"""Independent brute-force oracles shared by the test suite.

These deliberately avoid the library's own code paths: the LP oracle
enumerates candidate vertices from scratch, and the finite-difference
helpers evaluate objective callables directly.
"""

from __future__ import annotations

import itertools

import numpy as np


def point_feasible(prob, x, tol):
    if np.any(x < prob.var_lb - tol) or np.any(x > prob.var_ub + tol):
        return False
    if prob.A.shape[0]:
        r = prob.A @ x
        if np.any(r < prob.row_lb - tol) or np.any(r > prob.row_ub + tol):
            return False
    return True


def enumerate_best_vertex(prob, tol=1e-8):
    """Exhaustive LP oracle for small boxed problems.

    Intersects every choice of n constraint/bound hyperplanes, keeps the
    feasible intersections, and returns the minimum objective among them
    (None when no feasible vertex exists; a boxed feasible region is a
    polytope, so empty-vertex-set means infeasible).
    """
    m, n = prob.A.shape
    normals = []
    rhs = []
    for i in range(m):
        normals.append(prob.A[i])
        rhs.append(prob.row_lb[i])
        normals.append(prob.A[i])
        rhs.append(prob.row_ub[i])
    eye = np.eye(n)
    for j in range(n):
        normals.append(eye[j])
        rhs.append(prob.var_lb[j])
        normals.append(eye[j])
        rhs.append(prob.var_ub[j])
    normals = np.asarray(normals)
    rhs = np.asarray(rhs)

    combos = np.asarray(list(itertools.combinations(range(len(normals)), n)))
    M = normals[combos]
    R = rhs[combos]
    dets = np.linalg.det(M)
    ok = np.abs(dets) > 1e-10
    best = None
    if ok.any():
        X = np.linalg.solve(M[ok], R[ok][..., None])[..., 0]
        res = np.abs(np.einsum("kij,kj->ki", M[ok], X) - R[ok]).max(axis=1)
        for x, r in zip(X, res):
            if r > 1e-9 * (1.0 + np.abs(x).max()):
                continue
            if point_feasible(prob, x, tol):
                obj = float(prob.c @ x)
                best = obj if best is None else min(best, obj)
    return best


def random_boxed_lp(rng, feasible=True, max_n=5, max_m=5):
    """Random fully boxed LP, robustly feasible or robustly infeasible."""
    from hyperlp.simplex import LpProblem

    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(0 if feasible else 1, max_m + 1))
    A = rng.normal(size=(m, n))
    var_lb = rng.uniform(-2.0, 0.0, size=n)
    var_ub = var_lb + rng.uniform(0.5, 3.0, size=n)
    c = rng.normal(size=n)
    if feasible:
        x0 = rng.uniform(var_lb, var_ub)
        r0 = A @ x0 if m else np.zeros(0)
        row_lb = r0 - rng.uniform(0.1, 2.0, size=m)
        row_ub = r0 + rng.uniform(0.1, 2.0, size=m)
    else:
        # first row demands more than the box can deliver
        row_lb = np.empty(m)
        row_ub = np.empty(m)
        for i in range(m):
            hi = float(np.sum(np.maximum(A[i] * var_lb, A[i] * var_ub)))
            if i == 0:
                row_lb[i] = hi + 0.5
                row_ub[i] = hi + 1.5
            else:
                row_lb[i] = -abs(hi) - 1.0
                row_ub[i] = abs(hi) + 1.0
    return LpProblem(
        c=c, A=A, row_lb=row_lb, row_ub=row_ub, var_lb=var_lb, var_ub=var_ub
    )
