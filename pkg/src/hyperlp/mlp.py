"""Multilayer perceptron: forward pass, losses, gradients, Adam trainer.

Hidden layers use ReLU, the output layer softmax; the training objective
is average cross-entropy plus a grouped L2 weight penalty (biases are
never penalized). Parameters live in one flat vector `w`.

Flattening order (stable, round-trip exact): for each layer in order,
the weight matrix of shape (fan_in, fan_out) in row-major order, then
the bias vector of length fan_out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledSet
from .errors import DimensionError, DomainError, SizeError, TrainingError

PROB_FLOOR = 1e-12
NO_GROUP = -1

_train_calls = 0


def train_calls() -> int:
    """Process-wide count of train() invocations (budget instrumentation)."""
    return _train_calls


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_sizes: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1 or self.output_dim < 1:
            raise DimensionError("input_dim and output_dim must be >= 1")
        if len(self.hidden_sizes) > 3:
            raise DimensionError("at most 3 hidden layers are supported")
        if any(h < 1 for h in self.hidden_sizes):
            raise DimensionError("hidden sizes must be >= 1")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_sizes, self.output_dim]

    @property
    def num_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass(frozen=True)
class Model:
    arch: Architecture
    w: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != self.arch.num_params:
            raise DimensionError(
                f"w has length {w.shape[0] if w.ndim == 1 else w.shape}, "
                f"architecture needs {self.arch.num_params}"
            )
        object.__setattr__(self, "w", w)

    def with_w(self, w) -> "Model":
        return Model(self.arch, w)


def unpack(model: Model) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of (W, b) per layer; W has shape (fan_in, fan_out)."""
    dims = model.arch.layer_dims
    layers = []
    pos = 0
    for i in range(len(dims) - 1):
        fi, fo = dims[i], dims[i + 1]
        W = model.w[pos : pos + fi * fo].reshape(fi, fo)
        pos += fi * fo
        b = model.w[pos : pos + fo]
        pos += fo
        layers.append((W, b))
    return layers


def pack(arch: Architecture, layers) -> Model:
    """Inverse of unpack()."""
    parts = []
    for W, b in layers:
        parts.append(np.asarray(W, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return Model(arch, np.concatenate(parts) if parts else np.zeros(0))


def init_model(arch: Architecture, seed) -> Model:
    """Uniform He-style init: W ~ U(+-sqrt(6/fan_in)), biases zero."""
    rng = np.random.default_rng(seed)
    layers = []
    for fi, fo in zip(arch.layer_dims[:-1], arch.layer_dims[1:]):
        bound = np.sqrt(6.0 / fi)
        layers.append((rng.uniform(-bound, bound, size=(fi, fo)), np.zeros(fo)))
    return pack(arch, layers)


@dataclass(frozen=True)
class RegGroups:
    """Maps each coordinate of w to an L2 penalty group (NO_GROUP for biases)."""

    group_of: np.ndarray
    num_groups: int

    def __post_init__(self):
        g = np.ascontiguousarray(self.group_of, dtype=np.int64)
        if self.num_groups < 1:
            raise DomainError("need at least one regularization group")
        valid = (g == NO_GROUP) | ((g >= 0) & (g < self.num_groups))
        if not np.all(valid):
            raise DomainError("group ids must be NO_GROUP or in 0..num_groups-1")
        object.__setattr__(self, "group_of", g)

    @property
    def p(self) -> int:
        return self.num_groups

    def check_lambda(self, lam) -> np.ndarray:
        lam = np.ascontiguousarray(lam, dtype=np.float64)
        if lam.ndim != 1 or lam.shape[0] != self.num_groups:
            raise DimensionError(
                f"lambda has length {lam.shape}, expected {self.num_groups}"
            )
        if np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
            raise DomainError("regularization weights must be finite and >= 0")
        return lam

    def lambda_per_coord(self, lam) -> np.ndarray:
        """Penalty weight for every coordinate of w (0 on biases)."""
        lam = self.check_lambda(lam)
        out = np.zeros(self.group_of.shape[0])
        mask = self.group_of != NO_GROUP
        out[mask] = lam[self.group_of[mask]]
        return out


def _group_layout(arch: Architecture, assign) -> np.ndarray:
    dims = arch.layer_dims
    gof = np.empty(arch.num_params, dtype=np.int64)
    pos = 0
    for layer, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
        gof[pos : pos + fi * fo] = assign(layer)
        pos += fi * fo
        gof[pos : pos + fo] = NO_GROUP
        pos += fo
    return gof


def single_group(arch: Architecture) -> RegGroups:
    """All weights share one penalty term."""
    return RegGroups(_group_layout(arch, lambda layer: 0), 1)


def per_layer_groups(arch: Architecture) -> RegGroups:
    """One penalty term per layer (hidden layers and the output layer)."""
    n_layers = len(arch.hidden_sizes) + 1
    return RegGroups(_group_layout(arch, lambda layer: layer), n_layers)


def _check_features(arch: Architecture, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != arch.input_dim:
        raise DimensionError(
            f"features of width {X.shape[-1]} vs input_dim {arch.input_dim}"
        )


def forward_batch(model: Model, X: np.ndarray) -> np.ndarray:
    """Class probabilities for every row of X (softmax with max-subtraction)."""
    X = np.asarray(X, dtype=np.float64)
    _check_features(model.arch, X)
    H = X
    layers = unpack(model)
    for W, b in layers[:-1]:
        H = np.maximum(H @ W + b, 0.0)
    W, b = layers[-1]
    logits = H @ W + b
    logits = logits - logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def forward(model: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("forward expects a single feature row")
    return forward_batch(model, x[None, :])[0]


def accuracy(model: Model, dset: LabeledSet) -> float:
    if len(dset) == 0:
        raise SizeError("accuracy of an empty set")
    pred = np.argmax(forward_batch(model, dset.features), axis=1)
    return float(np.mean(pred == dset.labels))


def avg_cross_entropy(model: Model, dset: LabeledSet) -> float:
    """Mean of -log p(true class), probabilities floored at 1e-12."""
    if len(dset) == 0:
        raise SizeError("cross-entropy of an empty set")
    P = forward_batch(model, dset.features)
    p_true = P[np.arange(len(dset)), dset.labels]
    return float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))


def regularizer(w, groups: RegGroups, lam) -> float:
    """Grouped L2 penalty: sum_g lam[g] * sum_{i in g} w_i^2 (biases exempt)."""
    w = np.asarray(w, dtype=np.float64)
    per_coord = groups.lambda_per_coord(lam)
    if w.shape != per_coord.shape:
        raise DimensionError("w does not match the group layout")
    return float(per_coord @ (w * w))


def lower_objective(model: Model, groups: RegGroups, lam, train_set: LabeledSet) -> float:
    """Training loss: average cross-entropy plus the L2 penalty."""
    return avg_cross_entropy(model, train_set) + regularizer(model.w, groups, lam)


def grad_ce_w(model: Model, dset: LabeledSet) -> np.ndarray:
    """Backprop gradient of avg_cross_entropy with respect to w."""
    if len(dset) == 0:
        raise SizeError("gradient on an empty set")
    X = dset.features
    _check_features(model.arch, X)
    layers = unpack(model)
    acts = [X]
    H = X
    for W, b in layers[:-1]:
        H = np.maximum(H @ W + b, 0.0)
        acts.append(H)
    W, b = layers[-1]
    logits = H @ W + b
    logits -= logits.max(axis=1, keepdims=True)
    P = np.exp(logits)
    P /= P.sum(axis=1, keepdims=True)

    n = X.shape[0]
    delta = P
    delta[np.arange(n), dset.labels] -= 1.0
    delta /= n

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        A = acts[li]
        grads[li] = (A.T @ delta, delta.sum(axis=0))
        if li > 0:
            delta = (delta @ layers[li][0].T) * (acts[li] > 0.0)
    return pack(model.arch, grads).w


def grad_w(
    model: Model,
    groups: RegGroups,
    lam,
    dset: LabeledSet,
    include_reg: bool = True,
) -> np.ndarray:
    """Gradient of the lower objective (or of the loss alone) w.r.t. w."""
    g = grad_ce_w(model, dset)
    if include_reg:
        g = g + 2.0 * groups.lambda_per_coord(lam) * model.w
    return g


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 30
    grad_tol: float = 1e-3


@dataclass(frozen=True)
class TrainReport:
    converged: bool
    epochs_run: int
    final_grad_inf: float
    final_loss: float


def adam_steps(
    model: Model,
    groups: RegGroups,
    lam,
    train_set: LabeledSet,
    steps: int,
    cfg: TrainConfig = TrainConfig(),
) -> Model:
    """Deterministic full-batch Adam refinement from the given model."""
    lam_coord = groups.lambda_per_coord(lam)
    w = model.w.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t in range(1, steps + 1):
        g = grad_ce_w(model.with_w(w), train_set) + 2.0 * lam_coord * w
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        mhat = m / (1.0 - cfg.beta1**t)
        vhat = v / (1.0 - cfg.beta2**t)
        w = w - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
    return model.with_w(w)


def train(
    arch: Architecture,
    groups: RegGroups,
    lam,
    train_set: LabeledSet,
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    full_output: bool = False,
):
    """Minibatch Adam on the lower objective, deterministic given seed.

    Stops early once the full-batch gradient infinity-norm drops below
    cfg.grad_tol, otherwise runs the full epoch budget. Raises
    TrainingError with diagnostics if the loss or gradient goes
    non-finite.
    """
    global _train_calls
    _train_calls += 1

    lam_coord = groups.lambda_per_coord(lam)
    if lam_coord.shape[0] != arch.num_params:
        raise DimensionError("groups do not match the architecture")
    if len(train_set) == 0:
        raise SizeError("cannot train on an empty set")
    _check_features(arch, train_set.features)

    rng = np.random.default_rng(seed)
    model = init_model(arch, rng.integers(np.iinfo(np.int64).max))
    w = model.w.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    n = len(train_set)
    step = 0
    converged = False
    epochs_run = 0
    grad_inf = np.inf

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch = train_set.take(idx)
            g = grad_ce_w(model.with_w(w), batch) + 2.0 * lam_coord * w
            if not np.all(np.isfinite(g)):
                raise TrainingError(
                    f"non-finite gradient at epoch {epoch}, step {step} "
                    f"(lam={np.asarray(lam)!r}, arch={arch.layer_dims})"
                )
            step += 1
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
            mhat = m / (1.0 - cfg.beta1**step)
            vhat = v / (1.0 - cfg.beta2**step)
            w = w - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
        epochs_run = epoch + 1
        full_g = grad_ce_w(model.with_w(w), train_set) + 2.0 * lam_coord * w
        if not np.all(np.isfinite(full_g)) or not np.all(np.isfinite(w)):
            raise TrainingError(
                f"training diverged at epoch {epoch} "
                f"(lam={np.asarray(lam)!r}, arch={arch.layer_dims})"
            )
        grad_inf = float(np.max(np.abs(full_g)))
        if grad_inf <= cfg.grad_tol:
            converged = True
            break

    trained = model.with_w(w)
    if full_output:
        report = TrainReport(
            converged=converged,
            epochs_run=epochs_run,
            final_grad_inf=grad_inf,
            final_loss=lower_objective(trained, groups, lam, train_set),
        )
        return trained, report
    return trained


def model_to_json(model: Model) -> dict:
    return {
        "arch": {
            "input_dim": model.arch.input_dim,
            "hidden_sizes": list(model.arch.hidden_sizes),
            "output_dim": model.arch.output_dim,
        },
        "w": [float(v) for v in model.w],
    }


def model_from_json(doc: dict) -> Model:
    arch = Architecture(
        input_dim=int(doc["arch"]["input_dim"]),
        hidden_sizes=tuple(int(h) for h in doc["arch"]["hidden_sizes"]),
        output_dim=int(doc["arch"]["output_dim"]),
    )
    return Model(arch, np.asarray(doc["w"], dtype=np.float64))
