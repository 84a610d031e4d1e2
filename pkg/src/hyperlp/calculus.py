"""Derivative assembly for the descent-direction linear program.

Provides the validation-loss gradient, the lower rows of the training
objective's second-derivative matrix over (regularization weights,
model weights), coordinate freeze masks, and two closed-form bilevel
toy problems used as analytic oracles by the tests and the CLI
self-check.

For the grouped L2 penalty the mixed second derivatives are exact:
d2f/dw_i dlam_g = 2 w_i when coordinate i belongs to group g, and 0
otherwise (0 on biases). The weight-weight block is assembled by
central finite differences of the backprop gradient and symmetrized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import LabeledSet
from .errors import DimensionError, DomainError, ScaleError
from .mlp import Model, RegGroups, grad_ce_w, grad_w, unpack

_ROOT_EPS = math.sqrt(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class UpperGradient:
    """Gradient of the validation loss: zero in the penalty weights."""

    g_lam: np.ndarray
    g_w: np.ndarray

    @property
    def p(self) -> int:
        return self.g_lam.shape[0]

    @property
    def q(self) -> int:
        return self.g_w.shape[0]

    def joint(self) -> np.ndarray:
        return np.concatenate([self.g_lam, self.g_w])


@dataclass(frozen=True)
class HessianBlocks:
    """Rows of the second-derivative matrix for the moving w coordinates.

    matrix has one row per entry of row_coords and p+q columns: the
    first p columns differentiate in the penalty weights, the rest in w.
    Columns of w coordinates outside row_coords are zero; those
    coordinates are frozen downstream.
    """

    matrix: np.ndarray
    p: int
    q: int
    row_coords: np.ndarray

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.matrix), initial=0.0))


def upper_gradient(model: Model, val_set: LabeledSet, p: int) -> UpperGradient:
    """Validation cross-entropy gradient; the penalty has no direct term."""
    return UpperGradient(g_lam=np.zeros(p), g_w=grad_ce_w(model, val_set))


def freeze_mask(model: Model, policy: str) -> np.ndarray:
    """Boolean mask (length q) of coordinates allowed to move.

    Policies: "all", "last_layer" (final weight matrix and bias only),
    "trailing_k:<k>" (last k coordinates).
    """
    q = model.w.shape[0]
    if policy == "all":
        return np.ones(q, dtype=bool)
    if policy == "last_layer":
        W, b = unpack(model)[-1]
        tail = W.size + b.size
        mask = np.zeros(q, dtype=bool)
        mask[q - tail :] = True
        return mask
    if policy.startswith("trailing_k:"):
        try:
            k = int(policy.split(":", 1)[1])
        except ValueError as exc:
            raise DomainError(f"bad freeze policy {policy!r}") from exc
        if k < 0 or k > q:
            raise DomainError(f"trailing_k={k} outside 0..{q}")
        mask = np.zeros(q, dtype=bool)
        if k:
            mask[q - k :] = True
        return mask
    raise DomainError(f"unknown freeze policy {policy!r}")


def hessian_lower_rows(
    model: Model,
    groups: RegGroups,
    lam,
    train_set: LabeledSet,
    mask: np.ndarray | None = None,
    hessian_limit: int = 3000,
    step_scale: float = 1.0,
    symmetrize: bool = True,
) -> HessianBlocks:
    """Lower rows [d2f/dw dlam | d2f/dw dw] of the training objective.

    Penalty columns are analytic (2 w_i on group members, 0 on biases);
    weight columns use central differences of the full gradient with
    step h = step_scale * sqrt(eps) * (1 + |w_j|), then the weight block
    is symmetrized. Only coordinates selected by `mask` get rows and
    finite-difference columns.
    """
    lam = groups.check_lambda(lam)
    q = model.w.shape[0]
    p = groups.p
    if mask is None:
        mask = np.ones(q, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (q,):
        raise DimensionError("freeze mask does not match the parameter count")
    active = np.nonzero(mask)[0]
    u = active.shape[0]
    if u > hessian_limit:
        raise ScaleError(
            f"{u} moving parameters exceed hessian_limit={hessian_limit}; "
            "downsample the inputs or freeze coordinates (freeze policy) "
            "before requesting the second-derivative rows"
        )

    A = np.zeros((u, p + q))
    # analytic penalty columns
    gof = groups.group_of[active]
    member = gof != -1
    A[np.nonzero(member)[0], gof[member]] = 2.0 * model.w[active[member]]

    # finite-difference weight columns, restricted to moving coordinates
    w0 = model.w
    lam_coord = groups.lambda_per_coord(lam)

    def full_grad(w):
        return grad_ce_w(model.with_w(w), train_set) + 2.0 * lam_coord * w

    for j in active:
        h = step_scale * _ROOT_EPS * (1.0 + abs(w0[j]))
        wp = w0.copy()
        wp[j] += h
        wm = w0.copy()
        wm[j] -= h
        col = (full_grad(wp) - full_grad(wm)) / (2.0 * h)
        A[:, p + j] = col[active]

    if symmetrize and u:
        block = A[:, p + active]
        A[:, p + active] = 0.5 * (block + block.T)
    return HessianBlocks(matrix=A, p=p, q=q, row_coords=active)


def fd_lower_rows(grad_w_fn, lam, w, step_scale: float = 1.0) -> np.ndarray:
    """Generic finite-difference rows for a gradient callable.

    grad_w_fn(lam, w) must return the length-q gradient of the lower
    objective in w. Differentiates in every (lam, w) coordinate; used to
    validate the analytic columns on the toy problems.
    """
    lam = np.asarray(lam, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    p, q = lam.shape[0], w.shape[0]
    A = np.empty((q, p + q))
    for g in range(p):
        h = step_scale * _ROOT_EPS * (1.0 + abs(lam[g]))
        lp = lam.copy()
        lp[g] += h
        lm = lam.copy()
        lm[g] -= h
        A[:, g] = (grad_w_fn(lp, w) - grad_w_fn(lm, w)) / (2.0 * h)
    for j in range(q):
        h = step_scale * _ROOT_EPS * (1.0 + abs(w[j]))
        wp = w.copy()
        wp[j] += h
        wm = w.copy()
        wm[j] -= h
        A[:, p + j] = (grad_w_fn(lam, wp) - grad_w_fn(lam, wm)) / (2.0 * h)
    return A


def dump_hessian_csv(hess: HessianBlocks, path) -> None:
    """Debug CSV: first line 'p,q', then the rows of the matrix."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{hess.p},{hess.q}\n")
        for row in hess.matrix:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


class _QuadraticToy:
    """f = (w - lam)^2, F = (w - 1)^2; the induced path is w(lam) = lam."""

    name = "quadratic"

    def f(self, lam, w):
        return (w - lam) ** 2

    def F(self, lam, w):
        return (w - 1.0) ** 2

    def grad_w_f(self, lam, w):
        return np.array([2.0 * (w[0] - lam[0])])

    def lower_rows(self, lam, w):
        return np.array([[-2.0, 2.0]])

    def upper_grad(self, lam, w):
        return UpperGradient(g_lam=np.zeros(1), g_w=np.array([2.0 * (w[0] - 1.0)]))

    def lower_solution(self, lam):
        return float(lam)

    def hypergradient(self, lam):
        return 2.0 * (lam - 1.0)

    def steepest_descent(self, lam, w):
        # constraint ties d_w = d_lam; objective 2(w-1) d_w over |d_lam|<=1
        gw = 2.0 * (w - 1.0)
        if gw == 0.0:
            return np.zeros(1), np.zeros(1), 0.0
        d = -math.copysign(1.0, gw)
        return np.array([d]), np.array([d]), gw * d


class _RidgeToy:
    """f = (w - 1)^2 + lam w^2, F = w^2; the path is w(lam) = 1/(1 + lam)."""

    name = "ridge"

    def f(self, lam, w):
        return (w - 1.0) ** 2 + lam * w**2

    def F(self, lam, w):
        return w**2

    def grad_w_f(self, lam, w):
        return np.array([2.0 * (w[0] - 1.0) + 2.0 * lam[0] * w[0]])

    def lower_rows(self, lam, w):
        return np.array([[2.0 * w[0], 2.0 + 2.0 * lam[0]]])

    def upper_grad(self, lam, w):
        return UpperGradient(g_lam=np.zeros(1), g_w=np.array([2.0 * w[0]]))

    def lower_solution(self, lam):
        return 1.0 / (1.0 + lam)

    def hypergradient(self, lam):
        return -2.0 / (1.0 + lam) ** 3

    def steepest_descent(self, lam, w):
        # constraint ties d_w = -w/(1+lam) d_lam; objective 2w d_w
        if w == 0.0:
            return np.zeros(1), np.zeros(1), 0.0
        ratio = -w / (1.0 + lam)
        # objective per unit d_lam is -2 w^2/(1+lam) < 0, so d_lam = 1
        return np.array([1.0]), np.array([ratio]), 2.0 * w * ratio


_TOYS = {"quadratic": _QuadraticToy(), "ridge": _RidgeToy()}


def toy_problem(name: str):
    try:
        return _TOYS[name]
    except KeyError:
        raise DomainError(f"unknown analytic problem {name!r}") from None


def analytic_bilevel_oracle(name: str, point) -> tuple[tuple[np.ndarray, np.ndarray], float]:
    """Closed-form steepest-descent direction and path derivative dF/dlam."""
    toy = toy_problem(name)
    lam, w = float(point[0]), float(point[1])
    d_lam, d_w, _ = toy.steepest_descent(lam, w)
    return (d_lam, d_w), toy.hypergradient(lam)


def oracle_problem(name: str, point) -> tuple[UpperGradient, HessianBlocks]:
    """Exact gradient and second-derivative rows of a toy problem at a point."""
    toy = toy_problem(name)
    lam = np.array([float(point[0])])
    w = np.array([float(point[1])])
    grad = toy.upper_grad(lam, w)
    hess = HessianBlocks(
        matrix=toy.lower_rows(lam, w), p=1, q=1, row_coords=np.array([0])
    )
    return grad, hess
