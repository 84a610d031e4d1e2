"""Bounded-variable dense-tableau simplex for fully boxed LPs.

Solves  min c.x  subject to  row_lb <= A x <= row_ub  and
var_lb <= x <= var_ub, all bounds finite.

Method: each row gets a slack, giving the equality system
[A | -I].(x, s) = 0 with boxes on every variable. Variables start at
the bound nearest zero, or nonbasic-free at zero when their box
straddles it; rows whose slack cannot sit inside its box at that point
receive an artificial variable, and Phase I drives the artificials to
zero (else Infeasible) before Phase II minimizes the true objective.
An entering variable either displaces a basic one (pivot) or jumps
across its own box (bound flip). Pricing is exact steepest-edge by
default (Dantzig available); after 50 consecutive degenerate steps
Bland's rule takes over until progress resumes, which guarantees
termination.

The hot kernels (pricing, ratio test, tableau elimination) live in a
compiled extension with a numpy fallback selected at import; both
backends produce identical pivot sequences. Set HYPERLP_PURE=1 to force
the numpy backend.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import as_matrix, as_vector

if os.environ.get("HYPERLP_PURE"):
    from . import _kernels_py as _K

    HAVE_COMPILED_KERNELS = False
else:
    try:
        from . import _kernels as _K  # type: ignore[attr-defined]

        HAVE_COMPILED_KERNELS = True
    except ImportError:
        from . import _kernels_py as _K

        HAVE_COMPILED_KERNELS = False


def kernel_backend() -> str:
    """Name of the active kernel backend ("compiled" or "numpy")."""
    return _K.BACKEND


AT_LOWER, AT_UPPER, BASIC, FIXED, NB_FREE = 0, 1, 2, 3, 4

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class LpProblem:
    """min c.x with two-sided rows row_lb <= A x <= row_ub and boxed vars."""

    c: np.ndarray
    A: np.ndarray
    row_lb: np.ndarray
    row_ub: np.ndarray
    var_lb: np.ndarray
    var_ub: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", as_vector(self.c))
        object.__setattr__(self, "A", as_matrix(self.A))
        for name in ("row_lb", "row_ub", "var_lb", "var_ub"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        m, n = self.A.shape
        if self.c.shape[0] != n:
            raise DimensionError(f"c has length {self.c.shape[0]}, A has {n} columns")
        if self.row_lb.shape[0] != m or self.row_ub.shape[0] != m:
            raise DimensionError("row bound lengths do not match A")
        if self.var_lb.shape[0] != n or self.var_ub.shape[0] != n:
            raise DimensionError("variable bound lengths do not match A")
        if np.any(self.row_lb > self.row_ub):
            raise DimensionError("row_lb > row_ub")
        if np.any(self.var_lb > self.var_ub):
            raise DimensionError("var_lb > var_ub")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int


def residuals(problem: LpProblem, x) -> tuple[float, float]:
    """Max violation of row constraints and of variable boxes at x."""
    x = as_vector(x)
    m, n = problem.shape
    if x.shape[0] != n:
        raise DimensionError(f"point has length {x.shape[0]}, expected {n}")
    bound_violation = float(
        max(
            np.max(problem.var_lb - x, initial=0.0),
            np.max(x - problem.var_ub, initial=0.0),
        )
    )
    if m:
        r = problem.A @ x
        row_violation = float(
            max(
                np.max(problem.row_lb - r, initial=0.0),
                np.max(r - problem.row_ub, initial=0.0),
            )
        )
    else:
        row_violation = 0.0
    return max(row_violation, 0.0), max(bound_violation, 0.0)


def solve(
    problem: LpProblem,
    feas_tol: float = 1e-9,
    max_iters: int | None = None,
    kernels=None,
    pricing: str = "steepest_edge",
) -> LpSolution:
    """Two-phase bounded simplex. Never reports Optimal on an infeasible point.

    pricing: "steepest_edge" (default; far fewer iterations on the thin
    row-relaxation polytopes this package produces) or "dantzig".
    Bland's rule takes over after a degeneracy streak either way.
    """
    K = kernels if kernels is not None else _K
    if pricing not in ("steepest_edge", "dantzig"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    steepest = pricing == "steepest_edge"
    A = problem.A
    m, n = A.shape
    if max_iters is None:
        max_iters = 20000 + 10 * (m + n)
    dual_tol = max(feas_tol, 1e-12)
    piv_tol = 1e-10

    # standard form columns: n structural, m slacks, then artificials.
    # Start each variable as close to zero as its box allows; boxes that
    # straddle zero start nonbasic-free at zero. When zero is feasible
    # (every descent-direction LP), this start needs no phase I at all.
    status = np.full(n + m, AT_LOWER, dtype=np.int8)
    fixed = problem.var_lb == problem.var_ub
    straddle = (problem.var_lb <= 0.0) & (problem.var_ub >= 0.0) & ~fixed
    upper_closer = (
        (np.abs(problem.var_ub) < np.abs(problem.var_lb)) & ~straddle & ~fixed
    )
    status[:n][fixed] = FIXED
    status[:n][straddle] = NB_FREE
    status[:n][upper_closer] = AT_UPPER
    x0 = np.where(status[:n] == AT_UPPER, problem.var_ub, problem.var_lb)
    x0[status[:n] == NB_FREE] = 0.0
    r0 = A @ x0 if m else np.zeros(0)

    # scale for the phase-I infeasibility verdict, from problem data only
    bound_scale = max(
        1.0,
        float(np.max(np.abs(problem.var_lb), initial=0.0)),
        float(np.max(np.abs(problem.var_ub), initial=0.0)),
        float(np.max(np.abs(problem.row_lb), initial=0.0)),
        float(np.max(np.abs(problem.row_ub), initial=0.0)),
    )

    basis = np.empty(m, dtype=np.int64)
    beta = np.empty(m, dtype=np.float64)
    binv_scale = np.empty(m, dtype=np.float64)
    art_rows: list[int] = []
    art_sign: list[float] = []
    for i in range(m):
        if problem.row_lb[i] <= r0[i] <= problem.row_ub[i]:
            basis[i] = n + i
            status[n + i] = BASIC
            binv_scale[i] = -1.0
            beta[i] = r0[i]
        else:
            if r0[i] < problem.row_lb[i]:
                sval = problem.row_lb[i]
                status[n + i] = AT_LOWER
            else:
                sval = problem.row_ub[i]
                status[n + i] = AT_UPPER
            if problem.row_lb[i] == problem.row_ub[i]:
                status[n + i] = FIXED
            v = r0[i] - sval
            e = -1.0 if v > 0 else 1.0
            art_rows.append(i)
            art_sign.append(e)
            basis[i] = n + m + len(art_rows) - 1
            binv_scale[i] = 1.0 / e
            beta[i] = abs(v)

    na = len(art_rows)
    nc = n + m + na
    art_base = n + m

    A_all = np.zeros((m, nc), dtype=np.float64)
    if m:
        A_all[:, :n] = A
        A_all[np.arange(m), n + np.arange(m)] = -1.0
        for k, (i, e) in enumerate(zip(art_rows, art_sign)):
            A_all[i, art_base + k] = e

    # artificials are minimized, so an infinite cap is safe: they can only
    # leave the basis at zero, where they are fixed for good
    lb_all = np.concatenate([problem.var_lb, problem.row_lb, np.zeros(na)])
    ub_all = np.concatenate([problem.var_ub, problem.row_ub, np.full(na, np.inf)])
    status = np.concatenate([status, np.full(na, BASIC, dtype=np.int8)])

    c_phase2 = np.concatenate([problem.c, np.zeros(m + na)])
    c_phase1 = np.concatenate([np.zeros(n + m), np.ones(na)])

    TB = np.empty((m + 2, nc), dtype=np.float64)
    if m:
        TB[:m] = binv_scale[:, None] * A_all
    TB[m] = c_phase2 - (c_phase2[basis] @ TB[:m] if m else 0.0)
    TB[m + 1] = c_phase1 - (c_phase1[basis] @ TB[:m] if m else 0.0)

    infeas_tol = max(feas_tol, 1e-9) * 100.0 * bound_scale

    phase = 1 if na else 2
    cost_row = m + 1 if phase == 1 else m
    bland = False
    degen_streak = 0
    iters = 0
    out_status = None

    while True:
        if iters >= max_iters:
            out_status = ITERATION_LIMIT
            break
        z = TB[cost_row]
        if bland:
            j = K.bland_price(z, status, dual_tol)
        elif steepest and m:
            # exact reference weights, read straight off the dense tableau;
            # computed here (not in the kernels) so both backends price on
            # bit-identical values
            norms2 = np.einsum("ij,ij->j", TB[:m], TB[:m])
            j = K.steepest_edge_price(z, status, dual_tol, norms2)
        else:
            j = K.dantzig_price(z, status, dual_tol)
        if j < 0:
            if phase == 1:
                infeas = float(beta[basis >= art_base].sum()) if m else 0.0
                if infeas > infeas_tol:
                    out_status = INFEASIBLE
                    break
                for k in range(na):
                    var = art_base + k
                    lb_all[var] = ub_all[var] = 0.0
                    if status[var] != BASIC:
                        status[var] = FIXED
                phase = 2
                cost_row = m
                bland = False
                degen_streak = 0
                continue
            out_status = OPTIMAL
            break

        if status[j] == AT_LOWER:
            dirn, v_j = 1.0, lb_all[j]
        elif status[j] == AT_UPPER:
            dirn, v_j = -1.0, ub_all[j]
        else:  # nonbasic free, resting at zero
            dirn, v_j = (1.0 if z[j] < 0.0 else -1.0), 0.0
        t_bound = (ub_all[j] - v_j) if dirn > 0 else (v_j - lb_all[j])
        col = np.ascontiguousarray(TB[:m, j])
        t, r = K.ratio_test(
            col,
            beta,
            lb_all[basis],
            ub_all[basis],
            dirn,
            t_bound,
            piv_tol,
            bland,
            basis,
        )
        if not np.isfinite(t):
            out_status = UNBOUNDED
            break

        if t <= 1e-12:
            degen_streak += 1
            if degen_streak >= 50:
                bland = True
        else:
            degen_streak = 0
            bland = False

        if m:
            beta -= (dirn * t) * col
        if r < 0:
            status[j] = AT_UPPER if dirn > 0 else AT_LOWER
        else:
            enter_val = v_j + dirn * t
            leave = int(basis[r])
            rate_r = -dirn * col[r]
            if leave >= art_base:
                status[leave] = FIXED
                lb_all[leave] = ub_all[leave] = 0.0
            elif lb_all[leave] == ub_all[leave]:
                status[leave] = FIXED
            elif rate_r < 0.0:
                status[leave] = AT_LOWER
            else:
                status[leave] = AT_UPPER
            K.pivot_update(TB, r, j)
            beta[r] = enter_val
            basis[r] = j
            status[j] = BASIC
        iters += 1

    x = _extract(problem, A_all, basis, beta, status, lb_all, ub_all)
    if out_status == OPTIMAL:
        row_v, bound_v = residuals(problem, x)
        if max(row_v, bound_v) > feas_tol:
            out_status = ITERATION_LIMIT  # not certified; never silently wrong
    return LpSolution(
        x=x,
        objective=float(problem.c @ x),
        status=out_status,
        iterations=iters,
    )


def _extract(problem, A_all, basis, beta, status, lb_all, ub_all) -> np.ndarray:
    """Structural solution with basic values re-solved against the basis.

    A fresh dense solve removes the roundoff accumulated in the tableau,
    which keeps Optimal solutions inside feas_tol even after thousands
    of pivots.
    """
    m, n = problem.shape
    x_all = np.where(status == AT_UPPER, ub_all, lb_all)
    x_all[status == NB_FREE] = 0.0
    if m:
        nb_mask = status != BASIC
        rhs = -(A_all[:, nb_mask] @ x_all[nb_mask])
        bmat = A_all[:, basis]
        try:
            beta_exact = np.linalg.solve(bmat, rhs)
        except np.linalg.LinAlgError:
            beta_exact = np.linalg.lstsq(bmat, rhs, rcond=None)[0]
        if not np.all(np.isfinite(beta_exact)):
            beta_exact = beta
        x_all = x_all.copy()
        x_all[basis] = beta_exact
    return np.ascontiguousarray(x_all[:n])


def dump_problem(problem: LpProblem, path) -> None:
    """Plain-text dump: 'n m', then c, A rows, row bounds, var bounds."""
    m, n = problem.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{n} {m}\n")
        fh.write(" ".join(f"{v:.17g}" for v in problem.c) + "\n")
        for i in range(m):
            fh.write(" ".join(f"{v:.17g}" for v in problem.A[i]) + "\n")
        for i in range(m):
            fh.write(f"{problem.row_lb[i]:.17g} {problem.row_ub[i]:.17g}\n")
        for j in range(n):
            fh.write(f"{problem.var_lb[j]:.17g} {problem.var_ub[j]:.17g}\n")


def load_problem(path) -> LpProblem:
    """Inverse of dump_problem."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    n, m = (int(v) for v in tokens[0].split())
    c = np.array([float(v) for v in tokens[1].split()])
    A = np.array(
        [[float(v) for v in tokens[2 + i].split()] for i in range(m)]
    ).reshape(m, n)
    row_b = np.array(
        [[float(v) for v in tokens[2 + m + i].split()] for i in range(m)]
    ).reshape(m, 2)
    var_b = np.array(
        [[float(v) for v in tokens[2 + 2 * m + j].split()] for j in range(n)]
    ).reshape(n, 2)
    return LpProblem(
        c=c,
        A=A,
        row_lb=row_b[:, 0],
        row_ub=row_b[:, 1],
        var_lb=var_b[:, 0],
        var_ub=var_b[:, 1],
    )
