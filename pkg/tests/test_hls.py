import numpy as np
import pytest

from hyperlp import simplex
from hyperlp.calculus import hessian_lower_rows, oracle_problem, toy_problem, upper_gradient
from hyperlp.datasets import make_splits, synth_gaussians
from hyperlp.errors import DimensionError, DomainError
from hyperlp.hls import (
    CurvePoint,
    HlsConfig,
    build_lp,
    descent_direction,
    direction_from_blocks,
    finetune,
    line_search,
    resolve_delta,
    step_grid,
    toy_finetune,
    write_curve_csv,
)
from hyperlp.mlp import Architecture, TrainConfig, grad_w, single_group, train


@pytest.fixture(scope="module")
def trained_setup():
    source = synth_gaussians(320, 6, 3, separation=2.5, seed=31)
    splits = make_splits(source, 160, 80, 80, seed=1)
    arch = Architecture(6, (5,), 3)
    groups = single_group(arch)
    lam0 = np.array([0.0])
    model = train(arch, groups, lam0, splits.train, TrainConfig(epochs=30), seed=7)
    return model, groups, lam0, splits


def test_quadratic_oracle_direction():
    grad, hess = oracle_problem("quadratic", (0.0, 0.0))
    for box in (1.0, 2.0):
        d = direction_from_blocks(grad, hess, HlsConfig(delta=0.0, dw_box=box))
        assert d.lp_status == simplex.OPTIMAL
        assert np.allclose(d.d_lam, [1.0], atol=1e-9)
        assert np.allclose(d.d_w, [1.0], atol=1e-9)
        assert d.directional_derivative == pytest.approx(-2.0, abs=1e-9)


def test_ridge_oracle_direction():
    grad, hess = oracle_problem("ridge", (0.0, 1.0))
    d = direction_from_blocks(grad, hess, HlsConfig(delta=0.0))
    assert np.allclose(d.d_lam, [1.0], atol=1e-9)
    assert np.allclose(d.d_w, [-1.0], atol=1e-9)
    assert d.directional_derivative == pytest.approx(-2.0, abs=1e-9)


def test_zero_gradient_gives_zero_derivative():
    grad, hess = oracle_problem("quadratic", (1.0, 1.0))
    assert np.array_equal(grad.g_w, [0.0])
    d = direction_from_blocks(grad, hess, HlsConfig(delta=0.0))
    assert d.directional_derivative == pytest.approx(0.0, abs=1e-12)


def test_toy_finetune_quadratic_reaches_optimum():
    cfg = HlsConfig(delta=0.0, dw_box=2.0, t0=0.25, t_ratio=2.0, t_steps=4)
    res = toy_finetune("quadratic", (0.0, 0.0), cfg)
    assert res.t_star == pytest.approx(1.0, abs=1e-12)
    assert res.upper_value <= 1e-6
    assert res.lam_star[0] == pytest.approx(1.0) and res.w_star[0] == pytest.approx(1.0)


def test_toy_finetune_stationary_point_stays_put():
    res = toy_finetune("quadratic", (1.0, 1.0))
    assert res.t_star == 0.0
    assert len(res.curve) == 1


def test_first_order_expansion_on_toys():
    for name, point in (("quadratic", (0.0, 0.0)), ("ridge", (0.0, 1.0))):
        toy = toy_problem(name)
        grad, hess = oracle_problem(name, point)
        d = direction_from_blocks(grad, hess, HlsConfig(delta=0.0))
        dd = d.directional_derivative
        f0 = toy.F(point[0], point[1])
        for t in (1e-2, 1e-3, 1e-4):
            ft = toy.F(point[0] + t * d.d_lam[0], point[1] + t * d.d_w[0])
            ratio = (ft - f0) / (t * dd)
            assert abs(ratio - 1.0) <= t


def test_build_lp_shapes_and_boxes():
    grad, hess = oracle_problem("ridge", (0.0, 1.0))
    cfg = HlsConfig(delta=0.5, dw_box=3.0)
    lp = build_lp(grad, hess, cfg)
    assert lp.shape == (1, 2)
    assert np.array_equal(lp.row_lb, [-0.5]) and np.array_equal(lp.row_ub, [0.5])
    assert np.array_equal(lp.var_lb, [-1.0, -3.0])
    assert np.array_equal(lp.var_ub, [1.0, 3.0])


def test_delta_default_scales_with_hessian():
    _, hess = oracle_problem("ridge", (0.0, 1.0))
    assert resolve_delta(HlsConfig(), hess) == pytest.approx(
        1e-6 * max(1.0, hess.norm_inf())
    )
    assert resolve_delta(HlsConfig(delta=0.25), hess) == 0.25


def test_config_validation():
    with pytest.raises(DomainError):
        HlsConfig(delta=-1.0)
    with pytest.raises(DomainError):
        HlsConfig(t_ratio=1.0)
    with pytest.raises(DomainError):
        HlsConfig(dw_box=0.0)
    with pytest.raises(DomainError):
        HlsConfig(t_steps=0)


def test_step_grid_caps_at_zero_crossing():
    cfg = HlsConfig(t0=0.1, t_ratio=2.0, t_steps=6)
    ts = step_grid(cfg, np.array([0.5]), np.array([-1.0]))
    assert ts[-1] == pytest.approx(0.5)
    assert all(t <= 0.5 + 1e-15 for t in ts)
    # coordinates already at zero do not collapse the grid
    full = step_grid(cfg, np.array([0.0]), np.array([-1.0]))
    assert len(full) == 6


def test_descent_direction_invariants_on_trained_model(trained_setup):
    model, groups, lam0, splits = trained_setup
    cfg = HlsConfig()
    d = descent_direction(model, groups, lam0, splits, cfg)
    assert d.lp_status == simplex.OPTIMAL
    assert d.directional_derivative < 0.0
    assert np.all(d.d_lam >= -1.0 - 1e-12) and np.all(d.d_lam <= 1.0 + 1e-12)
    assert np.all(np.abs(d.d_w) <= cfg.dw_box + 1e-12)
    hess = hessian_lower_rows(model, groups, lam0, splits.train)
    joint = np.concatenate([d.d_lam, d.d_w])
    assert np.max(np.abs(hess.matrix @ joint)) <= d.delta + cfg.feas_tol
    grad = upper_gradient(model, splits.val, p=groups.p)
    assert float(grad.joint() @ joint) == pytest.approx(
        d.directional_derivative, abs=1e-9
    )


def test_line_search_never_loses_to_base(trained_setup):
    model, groups, lam0, splits = trained_setup
    cfg = HlsConfig(t_steps=10)
    res = finetune(model, groups, lam0, splits, cfg)
    assert res.curve[0].t == 0.0
    assert res.curve[-1].t > 0.0
    assert len(res.curve) == 11  # t=0 plus the full grid (lam0 = 0 cannot truncate)
    val0 = res.curve[0].val_loss
    assert min(pt.val_loss for pt in res.curve) == pytest.approx(
        res.curve[[pt.t for pt in res.curve].index(res.t_star)].val_loss
    )
    assert res.curve[[pt.t for pt in res.curve].index(res.t_star)].val_loss <= val0
    assert np.all(res.lam_star >= 0.0)


def test_line_search_zero_derivative_short_circuit(trained_setup):
    model, groups, lam0, splits = trained_setup
    d = descent_direction(model, groups, lam0, splits)
    stopped = type(d)(
        d_lam=np.zeros_like(d.d_lam),
        d_w=np.zeros_like(d.d_w),
        directional_derivative=0.0,
        lp_status=d.lp_status,
        lp_iterations=d.lp_iterations,
        delta=d.delta,
        stationarity_norm=d.stationarity_norm,
        stationarity_ok=d.stationarity_ok,
    )
    res = line_search(model, lam0, stopped, splits)
    assert res.t_star == 0.0
    assert len(res.curve) == 1
    assert np.array_equal(res.model_star.w, model.w)


def test_iteration_limit_direction_flagged_unusable(trained_setup):
    model, groups, lam0, splits = trained_setup
    cfg = HlsConfig(max_iters=1)
    d = descent_direction(model, groups, lam0, splits, cfg)
    assert d.lp_status == simplex.ITERATION_LIMIT
    assert not d.usable
    res = line_search(model, lam0, d, splits, cfg)
    assert res.t_star == 0.0 and len(res.curve) == 1


def test_frozen_coordinates_stay_exactly_zero(trained_setup):
    model, groups, lam0, splits = trained_setup
    cfg = HlsConfig(freeze_policy="last_layer")
    d = descent_direction(model, groups, lam0, splits, cfg)
    from hyperlp.calculus import freeze_mask

    mask = freeze_mask(model, "last_layer")
    assert np.all(d.d_w[~mask] == 0.0)
    assert d.directional_derivative <= 1e-12


def test_refresh_steps_reoptimizes_points(trained_setup):
    model, groups, lam0, splits = trained_setup
    cfg = HlsConfig(t_steps=4, refresh_steps=3)
    res = finetune(model, groups, lam0, splits, cfg)
    val0 = res.curve[0].val_loss
    best = min(pt.val_loss for pt in res.curve)
    assert best <= val0
    res2 = finetune(model, groups, lam0, splits, cfg)
    assert res2.t_star == res.t_star
    assert np.array_equal(res2.model_star.w, res.model_star.w)


def test_refresh_requires_groups(trained_setup):
    model, groups, lam0, splits = trained_setup
    d = descent_direction(model, groups, lam0, splits)
    with pytest.raises(DimensionError):
        line_search(model, lam0, d, splits, HlsConfig(refresh_steps=1))


def test_stationarity_warning_recorded(trained_setup):
    model, groups, lam0, splits = trained_setup
    # a freshly perturbed model is far from stationary
    noisy = model.with_w(model.w + 0.5)
    d = descent_direction(noisy, groups, lam0, splits)
    assert not d.stationarity_ok
    assert d.stationarity_norm > HlsConfig().stationarity_tol
    g = grad_w(noisy, groups, lam0, splits.train, include_reg=True)
    assert d.stationarity_norm == pytest.approx(np.max(np.abs(g)))


def test_finetune_two_penalty_groups(trained_setup):
    # hidden-layer group plus output-layer group
    _, _, _, splits = trained_setup
    from hyperlp.mlp import per_layer_groups

    arch = Architecture(6, (5,), 3)
    groups = per_layer_groups(arch)
    assert groups.p == 2
    lam0 = np.zeros(2)
    model = train(arch, groups, lam0, splits.train, TrainConfig(epochs=20), seed=5)
    res = finetune(model, groups, lam0, splits, HlsConfig(t_steps=6))
    assert res.lam_star.shape == (2,)
    assert np.all(res.lam_star >= 0.0)


def test_write_curve_csv(tmp_path):
    curve = [CurvePoint(0.0, 1.0, 2.0, 0.5), CurvePoint(0.5, 0.9, 1.5, 0.625)]
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,train_loss,val_loss,val_acc"
    assert lines[1] == "0,1,2,0.5"
    assert lines[2] == "0.5,0.9,1.5,0.625"
