"""Self-check routines behind the `oracles` CLI command.

Each check returns (name, passed, detail). The LP check compares the
simplex solver against an exhaustive vertex enumeration that shares no
code with it; the toy checks compare the full LP pipeline against
closed-form bilevel solutions.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import simplex
from .calculus import analytic_bilevel_oracle
from .hls import HlsConfig, toy_finetune
from .mlp import Architecture, Model, avg_cross_entropy, grad_w, regularizer, single_group
from .datasets import LabeledSet
from .search import arch_crossover, poly_mutation, sbx_crossover


def enumerate_boxed_minimum(prob: simplex.LpProblem, tol: float = 1e-8):
    """Exhaustive vertex enumeration; None when no feasible vertex exists."""
    m, n = prob.shape
    normals = []
    rhs = []
    for i in range(m):
        normals += [prob.A[i], prob.A[i]]
        rhs += [prob.row_lb[i], prob.row_ub[i]]
    eye = np.eye(n)
    for j in range(n):
        normals += [eye[j], eye[j]]
        rhs += [prob.var_lb[j], prob.var_ub[j]]
    normals = np.asarray(normals)
    rhs = np.asarray(rhs)
    best = None
    for combo in itertools.combinations(range(len(normals)), n):
        M = normals[list(combo)]
        r = rhs[list(combo)]
        if abs(np.linalg.det(M)) <= 1e-10:
            continue
        x = np.linalg.solve(M, r)
        if np.max(np.abs(M @ x - r)) > 1e-9 * (1.0 + np.abs(x).max()):
            continue
        if np.any(x < prob.var_lb - tol) or np.any(x > prob.var_ub + tol):
            continue
        if m:
            ax = prob.A @ x
            if np.any(ax < prob.row_lb - tol) or np.any(ax > prob.row_ub + tol):
                continue
        obj = float(prob.c @ x)
        best = obj if best is None else min(best, obj)
    return best


def random_boxed_problem(rng) -> simplex.LpProblem:
    n = int(rng.integers(1, 5))
    m = int(rng.integers(0, 5))
    A = rng.normal(size=(m, n))
    var_lb = rng.uniform(-2.0, 0.0, size=n)
    var_ub = var_lb + rng.uniform(0.5, 3.0, size=n)
    x0 = rng.uniform(var_lb, var_ub)
    r0 = A @ x0 if m else np.zeros(0)
    return simplex.LpProblem(
        c=rng.normal(size=n),
        A=A,
        row_lb=r0 - rng.uniform(0.1, 2.0, size=m),
        row_ub=r0 + rng.uniform(0.1, 2.0, size=m),
        var_lb=var_lb,
        var_ub=var_ub,
    )


def check_quadratic_pipeline(hls_cfg: HlsConfig):
    cfg = HlsConfig(
        delta=0.0,
        dw_box=max(hls_cfg.dw_box, 2.0),
        t0=0.25,
        t_ratio=2.0,
        t_steps=4,
    )
    res = toy_finetune("quadratic", (0.0, 0.0), cfg)
    (d_lam, d_w), hyper = analytic_bilevel_oracle("quadratic", (0.0, 0.0))
    ok = (
        abs(res.direction.d_lam[0] - d_lam[0]) <= 1e-6
        and abs(res.direction.d_w[0] - d_w[0]) <= 1e-6
        and abs(res.direction.directional_derivative - hyper) <= 1e-6
        and abs(res.t_star - 1.0) <= 1e-9
        and res.upper_value <= 1e-6
    )
    detail = (
        f"direction=({res.direction.d_lam[0]:.6f},{res.direction.d_w[0]:.6f}) "
        f"t*={res.t_star:.3f} F*={res.upper_value:.2e}"
    )
    return "quadratic steepest descent", ok, detail


def check_ridge_pipeline(hls_cfg: HlsConfig):
    res = toy_finetune("ridge", (0.0, 1.0), HlsConfig(delta=0.0))
    (d_lam, d_w), hyper = analytic_bilevel_oracle("ridge", (0.0, 1.0))
    ok = (
        abs(res.direction.d_lam[0] - d_lam[0]) <= 1e-6
        and abs(res.direction.d_w[0] - d_w[0]) <= 1e-6
        and abs(res.direction.directional_derivative - hyper) <= 1e-6
    )
    detail = f"direction=({res.direction.d_lam[0]:.6f},{res.direction.d_w[0]:.6f})"
    return "ridge steepest descent", ok, detail


def check_lp_against_enumeration(trials: int = 20, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        prob = random_boxed_problem(rng)
        sol = simplex.solve(prob)
        if sol.status != simplex.OPTIMAL:
            return "lp vs vertex enumeration", False, f"status={sol.status}"
        best = enumerate_boxed_minimum(prob)
        if best is None:
            return "lp vs vertex enumeration", False, "oracle found no vertex"
        worst = max(worst, abs(sol.objective - best))
        row_v, bound_v = simplex.residuals(prob, sol.x)
        if max(row_v, bound_v) > 1e-9:
            return "lp vs vertex enumeration", False, "feasibility violation"
    return (
        "lp vs vertex enumeration",
        worst <= 1e-7,
        f"{trials} instances, max objective gap {worst:.2e}",
    )


def check_gradient_finite_differences(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(3):
        arch = Architecture(3, (4,), 3)
        model = Model(arch, rng.uniform(-0.8, 0.8, size=arch.num_params))
        groups = single_group(arch)
        dset = LabeledSet(
            rng.uniform(size=(8, 3)), rng.integers(0, 3, size=8), 3
        )
        g = grad_w(model, groups, [0.1], dset, include_reg=True)
        root_eps = math.sqrt(np.finfo(np.float64).eps)
        fd = np.empty_like(g)
        for i in range(g.shape[0]):
            h = root_eps * (1.0 + abs(model.w[i]))
            wp = model.w.copy()
            wp[i] += h
            wm = model.w.copy()
            wm[i] -= h
            fp = avg_cross_entropy(model.with_w(wp), dset) + regularizer(
                wp, groups, [0.1]
            )
            fm = avg_cross_entropy(model.with_w(wm), dset) + regularizer(
                wm, groups, [0.1]
            )
            fd[i] = (fp - fm) / (2.0 * h)
        rel = np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-6)
        worst = max(worst, rel)
    return "backprop vs finite differences", worst < 1e-5, f"max rel err {worst:.2e}"


def check_variation_operators(seed: int = 0):
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(500):
        a, b = rng.uniform(-6, 0, size=2)
        c1, c2 = sbx_crossover(a, b, 15.0, (-1e12, 1e12), rng)
        ok &= abs((c1 + c2) - (a + b)) <= 1e-12 * max(1.0, abs(a + b))
        x = poly_mutation(float(rng.uniform(-6, 0)), 20.0, (-6.0, 0.0), rng)
        ok &= -6.0 <= x <= 0.0
        bits_a = tuple(int(v) for v in rng.integers(0, 2, size=14))
        bits_b = tuple(int(v) for v in rng.integers(0, 2, size=14))
        k1, k2 = arch_crossover(bits_a, bits_b, rng)
        ok &= all(
            sorted((k1[i], k2[i])) == sorted((bits_a[i], bits_b[i])) for i in range(14)
        )
    return "variation operators", bool(ok), "SBX mean, mutation bounds, bit multisets"


def run_all(hls_cfg: HlsConfig | None = None):
    cfg = hls_cfg if hls_cfg is not None else HlsConfig()
    return [
        check_quadratic_pipeline(cfg),
        check_ridge_pipeline(cfg),
        check_lp_against_enumeration(),
        check_gradient_finite_differences(),
        check_variation_operators(),
    ]
