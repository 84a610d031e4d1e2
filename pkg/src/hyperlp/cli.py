"""Command-line interface and experiment configuration.

Commands:
  finetune   train a base model with no penalty, fine-tune it with the
             LP hyper local search, write curve.csv and summary.json
  search     run ga / grid / random over genomes, write trace.csv,
             gen_best.csv (ga) and summary.json
  oracles    run the analytic self-checks, print a pass/fail table
  data synth generate a synthetic dataset as .npz

Configuration is a JSON file (--config) merged over defaults; unknown
keys are rejected. Command-line flags win over the file. One master
seed drives every stochastic choice through named substreams, so a rerun
with the same config and seed writes byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import verify
from .datasets import (
    DatasetSplits,
    LabeledSet,
    downsample,
    load_cifar10,
    load_idx,
    load_npz,
    make_splits,
    save_npz,
    synth_gaussians,
)
from .errors import ConfigError
from .hls import HlsConfig, finetune, write_curve_csv
from .mlp import (
    Architecture,
    TrainConfig,
    accuracy,
    avg_cross_entropy,
    model_to_json,
    per_layer_groups,
    single_group,
    train,
)
from .search import (
    GaParams,
    grid_search,
    micro_ga,
    random_search,
    write_gen_best_csv,
    write_trace_csv,
)
from .seeding import stream_seed

DATASET_DEFAULTS = {
    "synth": {
        "kind": "synth",
        "n": 4200,
        "dim": 49,
        "classes": 10,
        "separation": 3.0,
    },
    "mnist": {"kind": "mnist", "images": "", "labels": ""},
    "cifar10": {"kind": "cifar10", "batches": []},
    "npz": {"kind": "npz", "path": ""},
}

DEFAULT_CONFIG = {
    "dataset": DATASET_DEFAULTS["synth"],
    "splits": {"train": 2000, "val": 1000, "test": 1000},
    "pool": {"side": 0, "factor": 1},
    "arch": {"hidden": [10, 10]},
    "groups": "single",
    "method": "ga",
    "hls": True,
    "budget": 40,
    "trainer": {
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "batch_size": 64,
        "epochs": 30,
        "grad_tol": 1e-3,
    },
    "hls_cfg": {
        "delta": None,
        "dw_box": 1.0,
        "t0": 1e-3,
        "t_ratio": 2.0,
        "t_steps": 20,
        "freeze_policy": "all",
        "refresh_steps": 0,
        "refresh_lr": 1e-3,
        "stationarity_tol": 1e-2,
        "feas_tol": 1e-9,
        "hessian_limit": 3000,
        "max_iters": None,
    },
    "ga": {
        "population": 10,
        "generations": 15,
        "offspring": 2,
        "p_crossover": 0.9,
        "p_mutation": 0.1,
        "eta_crossover": 15.0,
        "eta_mutation": 20.0,
    },
    "save_models": False,
    "seed": 0,
    "out_dir": "out",
}


def _merge(user, defaults, path):
    if not isinstance(user, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    unknown = set(user) - set(defaults)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)} in {path or '<root>'}"
        )
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        if isinstance(defaults[key], dict):
            out[key] = _merge(val, defaults[key], f"{path}{key}.")
        else:
            out[key] = val
    return out


def validate_config(user: dict | None) -> dict:
    """Merge a user config over the defaults, rejecting unknown keys."""
    user = dict(user or {})
    dataset = user.pop("dataset", None)
    cfg = _merge(user, {k: v for k, v in DEFAULT_CONFIG.items() if k != "dataset"}, "")
    if dataset is None:
        cfg["dataset"] = copy.deepcopy(DEFAULT_CONFIG["dataset"])
    else:
        if not isinstance(dataset, dict) or "kind" not in dataset:
            raise ConfigError("dataset config needs a 'kind' field")
        kind = dataset["kind"]
        if kind not in DATASET_DEFAULTS:
            raise ConfigError(
                f"unknown dataset kind {kind!r}; expected one of {sorted(DATASET_DEFAULTS)}"
            )
        cfg["dataset"] = _merge(dataset, DATASET_DEFAULTS[kind], "dataset.")
    if cfg["method"] not in ("ga", "grid", "random"):
        raise ConfigError(f"method must be ga, grid or random, got {cfg['method']!r}")
    if cfg["groups"] not in ("single", "per_layer"):
        raise ConfigError(f"groups must be single or per_layer, got {cfg['groups']!r}")
    # constructing the dataclasses validates numeric ranges (delta >= 0 ...)
    try:
        trainer_config(cfg)
        hls_config(cfg)
        ga_params(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    return cfg


def trainer_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**cfg["trainer"])


def hls_config(cfg: dict) -> HlsConfig:
    return HlsConfig(**cfg["hls_cfg"])


def ga_params(cfg: dict) -> GaParams:
    return GaParams(**cfg["ga"])


def load_dataset(cfg: dict) -> LabeledSet:
    ds = cfg["dataset"]
    kind = ds["kind"]
    if kind == "synth":
        return synth_gaussians(
            ds["n"],
            ds["dim"],
            ds["classes"],
            ds["separation"],
            seed=stream_seed(cfg["seed"], "synth"),
        )
    if kind == "mnist":
        return load_idx(ds["images"], ds["labels"])
    if kind == "cifar10":
        return load_cifar10(ds["batches"])
    return load_npz(ds["path"])


def build_splits(cfg: dict) -> DatasetSplits:
    source = load_dataset(cfg)
    pool = cfg["pool"]
    if pool["side"]:
        source = downsample(source, pool["side"], pool["factor"])
    sp = cfg["splits"]
    return make_splits(
        source, sp["train"], sp["val"], sp["test"], seed=stream_seed(cfg["seed"], "split")
    )


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="ascii")


def cmd_finetune(cfg: dict) -> int:
    """Base model at zero penalty, one hyper-local-search pass, artifacts."""
    splits = build_splits(cfg)
    arch = Architecture(
        splits.train.dim, tuple(cfg["arch"]["hidden"]), splits.train.num_classes
    )
    groups = single_group(arch) if cfg["groups"] == "single" else per_layer_groups(arch)
    lam0 = np.zeros(groups.p)
    model = train(
        arch,
        groups,
        lam0,
        splits.train,
        trainer_config(cfg),
        seed=stream_seed(cfg["seed"], "train", 0),
    )
    base = {
        "val_loss": avg_cross_entropy(model, splits.val),
        "val_acc": accuracy(model, splits.val),
        "test_acc": accuracy(model, splits.test),
    }
    result = finetune(model, groups, lam0, splits, hls_config(cfg))
    tuned = {
        "val_loss": min(pt.val_loss for pt in result.curve),
        "val_acc": accuracy(result.model_star, splits.val),
        "test_acc": accuracy(result.model_star, splits.test),
    }
    summary = {
        "base_val_loss": base["val_loss"],
        "base_val_acc": base["val_acc"],
        "base_test_acc": base["test_acc"],
        "tuned_val_loss": tuned["val_loss"],
        "tuned_val_acc": tuned["val_acc"],
        "tuned_test_acc": tuned["test_acc"],
        "t_star": result.t_star,
        "lambda_star": [float(v) for v in result.lam_star],
        "directional_derivative": result.direction.directional_derivative,
        "lp_status": result.direction.lp_status,
        "stationarity_norm": result.direction.stationarity_norm,
        "curve_points": len(result.curve),
        "seed": cfg["seed"],
    }

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(result.curve, out / "curve.csv")
    _write_json(out / "summary.json", summary)
    if cfg["save_models"]:
        _write_json(out / "model_base.json", model_to_json(model))
        _write_json(out / "model_tuned.json", model_to_json(result.model_star))
    if not result.direction.stationarity_ok:
        print(
            f"note: base model is not stationary "
            f"(|grad|_inf={result.direction.stationarity_norm:.3g}); "
            "the direction is a heuristic"
        )
    print(
        f"finetune: val loss {base['val_loss']:.6f} -> {tuned['val_loss']:.6f} "
        f"at t*={result.t_star:.6g} (artifacts in {out})"
    )
    return 0


def cmd_search(cfg: dict) -> int:
    """One search driver run plus its trace artifacts."""
    splits = build_splits(cfg)
    method = cfg["method"]
    trainer = trainer_config(cfg)
    hls_cfg = hls_config(cfg)
    if method == "ga":
        trace = micro_ga(
            splits, cfg["hls"], ga_params(cfg), trainer, hls_cfg, seed=cfg["seed"]
        )
    elif method == "grid":
        trace = grid_search(
            splits, cfg["hls"], cfg["budget"], trainer, hls_cfg, seed=cfg["seed"]
        )
    else:
        trace = random_search(
            splits, cfg["hls"], cfg["budget"], trainer, hls_cfg, seed=cfg["seed"]
        )
    best = trace.best_record()
    summary = {
        "method": method,
        "hls": bool(cfg["hls"]),
        "total_models": trace.total_models,
        "best_val_loss": best.fitness,
        "best_val_acc": best.val_acc,
        "best_test_acc": best.test_acc,
        "best_genome": {
            "bits": best.bits,
            "log10_lambda": best.log10_lambda,
            "arch": list(best.arch),
            "lambda_eff": best.lambda_eff,
            "t_star": best.t_star,
        },
        "seed": cfg["seed"],
    }

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    if method == "ga":
        write_gen_best_csv(trace, out / "gen_best.csv")
    _write_json(out / "summary.json", summary)
    print(
        f"search[{method}{'+hls' if cfg['hls'] else ''}]: {trace.total_models} models, "
        f"best val acc {best.val_acc:.4f}, test acc {best.test_acc:.4f} "
        f"(artifacts in {out})"
    )
    return 0


def cmd_oracles(cfg: dict) -> int:
    """Analytic self-checks; exit 0 only if every check passes."""
    results = verify.run_all(hls_config(cfg))
    width = max(len(name) for name, _, _ in results)
    all_ok = True
    for name, ok, detail in results:
        mark = "ok" if ok else "FAIL"
        all_ok &= ok
        print(f"[{mark:>4}] {name:<{width}}  {detail}")
    return 0 if all_ok else 1


def cmd_data_synth(args) -> int:
    dset = synth_gaussians(args.n, args.dim, args.classes, args.separation, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_npz(dset, out)
    print(f"wrote {len(dset)} examples ({dset.dim} features, {dset.num_classes} classes) to {out}")
    return 0


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a JSON object")
    return doc


def _apply_flag_overrides(cfg: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "method", None) is not None:
        cfg["method"] = args.method
    if getattr(args, "hls", None) is not None:
        cfg["hls"] = args.hls
    if getattr(args, "out", None) is not None:
        cfg["out_dir"] = args.out
    if getattr(args, "budget", None) is not None:
        cfg["budget"] = args.budget
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperlp",
        description="Bilevel hyperparameter tuning with an LP hyper local search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory")

    p_fine = sub.add_parser("finetune", help="fine-tune a freshly trained base model")
    common(p_fine)

    p_search = sub.add_parser("search", help="hyperparameter search")
    common(p_search)
    p_search.add_argument("--method", choices=("ga", "grid", "random"))
    p_search.add_argument(
        "--hls", action=argparse.BooleanOptionalAction, default=None,
        help="enable/disable the hyper local search",
    )
    p_search.add_argument("--budget", type=int, help="models for grid/random")

    p_oracle = sub.add_parser("oracles", help="run the analytic self-checks")
    p_oracle.add_argument("--config", help="JSON config file")

    p_data = sub.add_parser("data", help="dataset utilities")
    data_sub = p_data.add_subparsers(dest="data_command", required=True)
    p_synth = data_sub.add_parser("synth", help="generate synthetic data")
    p_synth.add_argument("--n", type=int, default=1000)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--classes", type=int, default=4)
    p_synth.add_argument("--separation", type=float, default=4.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", default="synth.npz")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "data":
            return cmd_data_synth(args)
        cfg = validate_config(_load_config_file(args.config))
        cfg = _apply_flag_overrides(cfg, args)
        if args.command == "finetune":
            return cmd_finetune(cfg)
        if args.command == "search":
            return cmd_search(cfg)
        return cmd_oracles(cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
