"""Hyper local search: LP-based fine-tuning of a trained model.

At a trained model the first-order change of the validation loss along
a joint direction (d_lam, d_w) is linear, while staying optimal for the
training objective pins the direction to the null space of the lower
second-derivative rows. Relaxing those rows to |H d| <= delta and
boxing the variables yields a linear program whose solution is the
steepest-descent direction for the bilevel problem; a geometric line
search along it picks the step with the best validation loss.

The search never loses ground: t = 0 is always on the grid, so the
fine-tuned model is at worst the input model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import simplex
from .calculus import (
    HessianBlocks,
    UpperGradient,
    freeze_mask,
    hessian_lower_rows,
    oracle_problem,
    toy_problem,
    upper_gradient,
)
from .datasets import DatasetSplits
from .errors import DimensionError, DomainError
from .mlp import (
    Model,
    RegGroups,
    TrainConfig,
    accuracy,
    adam_steps,
    avg_cross_entropy,
    grad_w,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HlsConfig:
    """Settings for one fine-tuning pass.

    delta=None scales the row relaxation with the Hessian magnitude:
    1e-6 * max(1, |H|_inf). The direction box dw_box keeps the LP
    bounded; magnitude is immaterial because of the line search.
    refresh_steps > 0 re-optimizes each line-search point with that many
    full-batch Adam steps (default 0: pure straight-line models).
    """

    delta: float | None = None
    dw_box: float = 1.0
    t0: float = 1e-3
    t_ratio: float = 2.0
    t_steps: int = 20
    freeze_policy: str = "all"
    refresh_steps: int = 0
    refresh_lr: float = 1e-3
    stationarity_tol: float = 1e-2
    feas_tol: float = 1e-9
    hessian_limit: int = 3000
    max_iters: int | None = None

    def __post_init__(self):
        if self.delta is not None and not (self.delta >= 0.0):
            raise DomainError(f"delta must be >= 0, got {self.delta}")
        if self.dw_box <= 0.0:
            raise DomainError("dw_box must be > 0")
        if self.t_ratio <= 1.0:
            raise DomainError("t_ratio must be > 1")
        if self.t_steps < 1:
            raise DomainError("t_steps must be >= 1")
        if self.refresh_steps < 0:
            raise DomainError("refresh_steps must be >= 0")


@dataclass(frozen=True)
class DescentDirection:
    d_lam: np.ndarray
    d_w: np.ndarray
    directional_derivative: float
    lp_status: str
    lp_iterations: int
    delta: float
    stationarity_norm: float
    stationarity_ok: bool

    @property
    def usable(self) -> bool:
        return self.lp_status == simplex.OPTIMAL


@dataclass(frozen=True)
class CurvePoint:
    t: float
    train_loss: float
    val_loss: float
    val_acc: float


@dataclass(frozen=True)
class LineSearchResult:
    t_star: float
    model_star: Model
    lam_star: np.ndarray
    curve: list[CurvePoint]
    direction: DescentDirection | None = None


def resolve_delta(cfg: HlsConfig, hess: HessianBlocks) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return 1e-6 * max(1.0, hess.norm_inf())


def build_lp(grad: UpperGradient, hess: HessianBlocks, cfg: HlsConfig) -> simplex.LpProblem:
    """Assemble the relaxed descent-direction LP.

    Variables are (d_lam, d_w); rows are the lower second-derivative
    rows with bounds [-delta, delta]; d_lam is boxed at [-1, 1], d_w at
    [-dw_box, dw_box], and frozen coordinates at [0, 0].
    """
    p, q = grad.p, grad.q
    if hess.p != p or hess.q != q:
        raise DimensionError(
            f"gradient is ({p},{q}) but second-derivative rows are ({hess.p},{hess.q})"
        )
    delta = resolve_delta(cfg, hess)
    n = p + q
    m = hess.matrix.shape[0]
    var_lb = np.empty(n)
    var_ub = np.empty(n)
    var_lb[:p] = -1.0
    var_ub[:p] = 1.0
    var_lb[p:] = 0.0
    var_ub[p:] = 0.0
    var_lb[p + hess.row_coords] = -cfg.dw_box
    var_ub[p + hess.row_coords] = cfg.dw_box
    return simplex.LpProblem(
        c=grad.joint(),
        A=hess.matrix,
        row_lb=np.full(m, -delta),
        row_ub=np.full(m, delta),
        var_lb=var_lb,
        var_ub=var_ub,
    )


def direction_from_blocks(
    grad: UpperGradient, hess: HessianBlocks, cfg: HlsConfig
) -> DescentDirection:
    """Solve the LP for explicit gradient/Hessian blocks."""
    lp = build_lp(grad, hess, cfg)
    sol = simplex.solve(lp, feas_tol=cfg.feas_tol, max_iters=cfg.max_iters)
    if sol.status in (simplex.INFEASIBLE, simplex.UNBOUNDED):
        # zero is always feasible and every variable is boxed
        raise RuntimeError(f"descent LP reported {sol.status}; this is a solver bug")
    if sol.status == simplex.OPTIMAL:
        row_v, bound_v = simplex.residuals(lp, sol.x)
        if max(row_v, bound_v) > cfg.feas_tol:
            raise RuntimeError("descent LP solution violates its own constraints")
    p = grad.p
    return DescentDirection(
        d_lam=sol.x[:p].copy(),
        d_w=sol.x[p:].copy(),
        directional_derivative=sol.objective,
        lp_status=sol.status,
        lp_iterations=sol.iterations,
        delta=resolve_delta(cfg, hess),
        stationarity_norm=float("nan"),
        stationarity_ok=True,
    )


def descent_direction(
    model: Model,
    groups: RegGroups,
    lam,
    splits: DatasetSplits,
    cfg: HlsConfig = HlsConfig(),
) -> DescentDirection:
    """Steepest-descent direction of the validation loss at a trained model."""
    lam = groups.check_lambda(lam)
    g_train = grad_w(model, groups, lam, splits.train, include_reg=True)
    stat_norm = float(np.max(np.abs(g_train)))
    stat_ok = stat_norm <= cfg.stationarity_tol
    if not stat_ok:
        # recorded on the result; debug level because search drivers hit
        # this on most evaluations with modest training budgets
        log.debug(
            "model is not stationary (|grad|_inf=%.3g > %.3g); the direction "
            "may be unreliable",
            stat_norm,
            cfg.stationarity_tol,
        )
    mask = freeze_mask(model, cfg.freeze_policy)
    hess = hessian_lower_rows(
        model, groups, lam, splits.train, mask=mask, hessian_limit=cfg.hessian_limit
    )
    grad = upper_gradient(model, splits.val, p=groups.p)
    base = direction_from_blocks(grad, hess, cfg)
    return DescentDirection(
        d_lam=base.d_lam,
        d_w=base.d_w,
        directional_derivative=base.directional_derivative,
        lp_status=base.lp_status,
        lp_iterations=base.lp_iterations,
        delta=base.delta,
        stationarity_norm=stat_norm,
        stationarity_ok=stat_ok,
    )


def step_grid(cfg: HlsConfig, lam0: np.ndarray, d_lam: np.ndarray) -> list[float]:
    """Geometric step grid, capped where a positive penalty would cross zero.

    Coordinates already at zero with a negative direction component are
    handled by clamping along the path instead of collapsing the grid.
    """
    ts = [cfg.t0 * cfg.t_ratio**k for k in range(cfg.t_steps)]
    shrinking = (d_lam < 0.0) & (lam0 > 0.0)
    if np.any(shrinking):
        t_max = float(np.min(lam0[shrinking] / -d_lam[shrinking]))
        kept = [t for t in ts if t <= t_max]
        if len(kept) < len(ts) and (not kept or kept[-1] < t_max):
            kept.append(t_max)
        ts = kept
    return ts


def _search_curve(evaluate, lam0, direction, cfg):
    """Shared line-search driver.

    evaluate(t, lam_t) returns (payload, train_loss, val_loss, val_acc);
    the payload of the best point is returned alongside the curve.
    """
    lam0 = np.asarray(lam0, dtype=np.float64)
    curve: list[CurvePoint] = []
    best = None
    ts = [0.0]
    if direction.usable and direction.directional_derivative < 0.0:
        ts += step_grid(cfg, lam0, direction.d_lam)
    for t in ts:
        lam_t = np.maximum(lam0 + t * direction.d_lam, 0.0)
        payload, train_loss, val_loss, val_acc = evaluate(t, lam_t)
        curve.append(CurvePoint(t, train_loss, val_loss, val_acc))
        if best is None or val_loss < best[1]:
            best = (t, val_loss, lam_t, payload)
    t_star, _, lam_star, payload = best
    return t_star, lam_star, payload, curve


def line_search(
    model: Model,
    lam0,
    direction: DescentDirection,
    splits: DatasetSplits,
    cfg: HlsConfig = HlsConfig(),
    groups: RegGroups | None = None,
) -> LineSearchResult:
    """Pick the step along the direction with the lowest validation loss.

    With refresh_steps > 0 each candidate model is re-optimized for a
    few full-batch Adam steps at its own penalty vector before being
    scored (groups must then be provided).
    """
    lam0 = np.asarray(lam0, dtype=np.float64)
    if cfg.refresh_steps > 0 and groups is None:
        raise DimensionError("refresh_steps > 0 requires the penalty groups")
    w0 = model.w

    def evaluate(t, lam_t):
        cand = model.with_w(w0 + t * direction.d_w)
        if cfg.refresh_steps > 0:
            cand = adam_steps(
                cand,
                groups,
                lam_t,
                splits.train,
                cfg.refresh_steps,
                TrainConfig(learning_rate=cfg.refresh_lr),
            )
        return (
            cand,
            avg_cross_entropy(cand, splits.train),
            avg_cross_entropy(cand, splits.val),
            accuracy(cand, splits.val),
        )

    t_star, lam_star, model_star, curve = _search_curve(evaluate, lam0, direction, cfg)
    return LineSearchResult(
        t_star=t_star,
        model_star=model_star,
        lam_star=lam_star,
        curve=curve,
        direction=direction,
    )


def finetune(
    model: Model,
    groups: RegGroups,
    lam0,
    splits: DatasetSplits,
    cfg: HlsConfig = HlsConfig(),
) -> LineSearchResult:
    """One full fine-tuning pass: descent direction, then line search."""
    direction = descent_direction(model, groups, lam0, splits, cfg)
    return line_search(model, lam0, direction, splits, cfg, groups=groups)


@dataclass(frozen=True)
class ToyFinetuneResult:
    direction: DescentDirection
    t_star: float
    lam_star: np.ndarray
    w_star: np.ndarray
    upper_value: float
    curve: list[CurvePoint]


def toy_finetune(name: str, point, cfg: HlsConfig | None = None) -> ToyFinetuneResult:
    """Run the LP + line-search pipeline on a closed-form toy problem.

    The toy penalty variable is unconstrained, so no clamping is applied
    along the path; val_acc has no meaning here and is reported as 0.
    """
    if cfg is None:
        cfg = HlsConfig(delta=0.0)
    toy = toy_problem(name)
    grad, hess = oracle_problem(name, point)
    direction = direction_from_blocks(grad, hess, cfg)
    lam0 = np.array([float(point[0])])
    w0 = np.array([float(point[1])])

    best = None
    curve: list[CurvePoint] = []
    ts = [0.0]
    if direction.usable and direction.directional_derivative < 0.0:
        ts += [cfg.t0 * cfg.t_ratio**k for k in range(cfg.t_steps)]
    for t in ts:
        lam_t = lam0 + t * direction.d_lam
        w_t = w0 + t * direction.d_w
        upper = float(toy.F(lam_t[0], w_t[0]))
        lower = float(toy.f(lam_t[0], w_t[0]))
        curve.append(CurvePoint(t, lower, upper, 0.0))
        if best is None or upper < best[1]:
            best = (t, upper, lam_t, w_t)
    t_star, upper_star, lam_star, w_star = best
    return ToyFinetuneResult(
        direction=direction,
        t_star=t_star,
        lam_star=lam_star,
        w_star=w_star,
        upper_value=upper_star,
        curve=curve,
    )


def write_curve_csv(curve: list[CurvePoint], path) -> None:
    """Line-search curve as CSV: t, train_loss, val_loss, val_acc."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,train_loss,val_loss,val_acc\n")
        for pt in curve:
            fh.write(
                f"{pt.t:.9g},{pt.train_loss:.9g},{pt.val_loss:.9g},{pt.val_acc:.9g}\n"
            )
