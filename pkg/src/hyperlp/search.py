"""Upper-level search drivers over architectures and penalty strength.

A genome is 14 bits of architecture (2 bits of layer count, then three
4-bit neuron fields, big-endian) plus one continuous gene, the base-10
log of the L2 penalty in [-6, 0]. Decoding keeps the first layer-count
neuron fields and drops zero fields, so a zero field simply removes its
layer.

Three drivers share one evaluation path (train, optionally fine-tune
with the LP hyper local search, score on validation): a steady-state
micro genetic algorithm (binary tournaments, one-point bit crossover,
SBX and polynomial mutation on the continuous gene, offspring replace
the worst members only when strictly better), a fixed grid, and uniform
random sampling. Test-set metrics are recorded for reporting only and
are written after the generation's replacement decision; selection and
replacement read nothing but validation fitness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import DatasetSplits
from .errors import ConfigError, DimensionError, TrainingError
from .hls import HlsConfig, finetune
from .mlp import (
    Architecture,
    Model,
    TrainConfig,
    accuracy,
    avg_cross_entropy,
    single_group,
    train,
)
from .seeding import stream_rng, stream_seed

GENOME_BITS = 14
LOG_LAMBDA_LO = -6.0
LOG_LAMBDA_HI = 0.0
GRID_NEURONS = (4, 8, 12, 15)
GRID_LAYERS = (1, 2)
GRID_LOG_LAMBDAS = (-5.0, -4.0, -3.0, -2.0, -1.0)


@dataclass(frozen=True)
class Genome:
    bits: tuple[int, ...]
    log10_lambda: float

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != GENOME_BITS or any(b not in (0, 1) for b in bits):
            raise DimensionError(f"genome needs {GENOME_BITS} bits of 0/1")
        if not math.isfinite(self.log10_lambda):
            raise DimensionError("log10_lambda must be finite")
        object.__setattr__(self, "bits", bits)

    @property
    def layer_count(self) -> int:
        return self.bits[0] * 2 + self.bits[1]

    @property
    def neuron_fields(self) -> tuple[int, int, int]:
        vals = []
        for k in range(3):
            f = self.bits[2 + 4 * k : 6 + 4 * k]
            vals.append(f[0] * 8 + f[1] * 4 + f[2] * 2 + f[3])
        return tuple(vals)

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        fields = self.neuron_fields[: self.layer_count]
        return tuple(n for n in fields if n > 0)

    @property
    def lam(self) -> float:
        return 10.0 ** self.log10_lambda

    def bits_str(self) -> str:
        return "".join(str(b) for b in self.bits)


def encode_genome(layer_count: int, neurons, log10_lambda: float) -> Genome:
    """Inverse of decoding for layer_count in 0..3 and neurons in 0..15."""
    if not 0 <= layer_count <= 3:
        raise DimensionError("layer_count must be in 0..3")
    neurons = tuple(neurons) + (0,) * (3 - len(neurons))
    bits = [layer_count // 2, layer_count % 2]
    for n in neurons[:3]:
        if not 0 <= n <= 15:
            raise DimensionError("neuron counts must be in 0..15")
        bits += [(n >> 3) & 1, (n >> 2) & 1, (n >> 1) & 1, n & 1]
    return Genome(tuple(bits), float(log10_lambda))


def decode_architecture(genome: Genome, input_dim: int, output_dim: int) -> Architecture:
    return Architecture(input_dim, genome.hidden_sizes, output_dim)


def random_genome(rng: np.random.Generator) -> Genome:
    bits = tuple(int(b) for b in rng.integers(0, 2, size=GENOME_BITS))
    return Genome(bits, float(rng.uniform(LOG_LAMBDA_LO, LOG_LAMBDA_HI)))


def sbx_crossover(a: float, b: float, eta_c: float, bounds, rng) -> tuple[float, float]:
    """Simulated binary crossover on one gene, children clipped to bounds."""
    lo, hi = bounds
    u = float(rng.random())
    if u <= 0.5:
        beta = (2.0 * u) ** (1.0 / (eta_c + 1.0))
    else:
        beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta_c + 1.0))
    spread = beta * abs(b - a)
    c1 = 0.5 * ((a + b) - spread)
    c2 = 0.5 * ((a + b) + spread)
    return (
        float(min(max(c1, lo), hi)),
        float(min(max(c2, lo), hi)),
    )


def poly_mutation(x: float, eta_m: float, bounds, rng) -> float:
    """Bounded polynomial mutation on one gene."""
    lo, hi = bounds
    span = hi - lo
    u = float(rng.random())
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    if u < 0.5:
        val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta_m + 1.0)
        dq = val ** (1.0 / (eta_m + 1.0)) - 1.0
    else:
        val = 2.0 * (1.0 - u) + (2.0 * u - 1.0) * (1.0 - d2) ** (eta_m + 1.0)
        dq = 1.0 - val ** (1.0 / (eta_m + 1.0))
    return float(min(max(x + dq * span, lo), hi))


def arch_crossover(a: tuple[int, ...], b: tuple[int, ...], rng) -> tuple[tuple, tuple]:
    """One-point crossover on the whole bit string; cut uniform in 1..13."""
    cut = int(rng.integers(1, GENOME_BITS))
    return a[:cut] + b[cut:], b[:cut] + a[cut:]


def arch_mutation(bits: tuple[int, ...], p_bit: float, rng) -> tuple[int, ...]:
    """Independent per-bit flips with probability p_bit."""
    flips = rng.random(GENOME_BITS) < p_bit
    return tuple(int(b ^ int(f)) for b, f in zip(bits, flips))


@dataclass
class EvalRecord:
    index: int
    bits: str
    log10_lambda: float
    arch: tuple[int, ...]
    lambda_eff: list[float]
    fitness: float
    val_acc: float
    test_acc: float | None
    hls_used: bool
    t_star: float


@dataclass
class Individual:
    genome: Genome
    model: Model | None
    fitness: float
    val_acc: float
    lambda_eff: np.ndarray
    t_star: float
    record: EvalRecord


@dataclass
class SearchTrace:
    evaluations: list[EvalRecord] = field(default_factory=list)
    per_generation_best: list[float] = field(default_factory=list)
    total_models: int = 0
    events: list[tuple] = field(default_factory=list)

    def best_record(self) -> EvalRecord:
        finite = [r for r in self.evaluations if math.isfinite(r.fitness)]
        return min(finite, key=lambda r: r.fitness)


@dataclass(frozen=True)
class GaParams:
    population: int = 10
    generations: int = 15
    offspring: int = 2
    p_crossover: float = 0.9
    p_mutation: float = 0.1
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0


def evaluate(
    genome: Genome,
    splits: DatasetSplits,
    use_hls: bool,
    trainer_cfg: TrainConfig,
    hls_cfg: HlsConfig,
    train_seed: int,
    index: int = 0,
) -> Individual:
    """Train a model for the genome and score it on the validation set.

    With use_hls the trained model is fine-tuned by the LP hyper local
    search and the tuned (penalty, weights) pair is adopted. A diverged
    training is recorded with infinite fitness instead of aborting the
    run. Test metrics are not computed here; the caller fills them in
    after its replacement decision.
    """
    arch = decode_architecture(genome, splits.train.dim, splits.train.num_classes)
    groups = single_group(arch)
    lam0 = np.array([genome.lam])
    record = EvalRecord(
        index=index,
        bits=genome.bits_str(),
        log10_lambda=genome.log10_lambda,
        arch=tuple(arch.layer_dims),
        lambda_eff=[float(v) for v in lam0],
        fitness=math.inf,
        val_acc=math.nan,
        test_acc=None,
        hls_used=use_hls,
        t_star=math.nan,
    )
    try:
        model = train(arch, groups, lam0, splits.train, trainer_cfg, seed=train_seed)
    except TrainingError:
        return Individual(genome, None, math.inf, math.nan, lam0, math.nan, record)

    lam_eff = lam0
    t_star = math.nan
    if use_hls:
        res = finetune(model, groups, lam0, splits, hls_cfg)
        model = res.model_star
        lam_eff = res.lam_star
        t_star = res.t_star
        fitness = min(pt.val_loss for pt in res.curve)
    else:
        fitness = avg_cross_entropy(model, splits.val)
    val_acc = accuracy(model, splits.val)
    record.fitness = fitness
    record.val_acc = val_acc
    record.lambda_eff = [float(v) for v in lam_eff]
    record.t_star = t_star
    return Individual(genome, model, fitness, val_acc, lam_eff, t_star, record)


def _fill_test_metrics(ind: Individual, splits: DatasetSplits) -> None:
    if ind.model is None:
        ind.record.test_acc = math.nan
    else:
        ind.record.test_acc = accuracy(ind.model, splits.test)


def _tournament(pop: list[Individual], rng) -> Individual:
    i, j = rng.integers(0, len(pop), size=2)
    a, b = pop[int(i)], pop[int(j)]
    return b if b.fitness < a.fitness else a


def micro_ga(
    splits: DatasetSplits,
    use_hls: bool,
    params: GaParams = GaParams(),
    trainer_cfg: TrainConfig = TrainConfig(),
    hls_cfg: HlsConfig = HlsConfig(),
    seed: int = 0,
) -> SearchTrace:
    """Steady-state micro genetic algorithm over genomes.

    Each generation: two binary tournaments pick parents, crossover
    fires with probability p_crossover (one-point on bits, SBX on the
    continuous gene), mutation always applies (per-bit flips at
    p_mutation; polynomial mutation of the continuous gene with
    probability p_mutation), and each offspring replaces the current
    worst member only if strictly better.
    """
    rng = stream_rng(seed, "ga")
    bounds = (LOG_LAMBDA_LO, LOG_LAMBDA_HI)
    trace = SearchTrace()
    pop: list[Individual] = []
    eval_idx = 0

    for _ in range(params.population):
        ind = evaluate(
            random_genome(rng),
            splits,
            use_hls,
            trainer_cfg,
            hls_cfg,
            stream_seed(seed, "train", eval_idx),
            index=eval_idx,
        )
        trace.events.append(("eval", eval_idx, 0))
        trace.evaluations.append(ind.record)
        pop.append(ind)
        eval_idx += 1
    trace.events.append(("replace", 0))
    for ind in pop:
        _fill_test_metrics(ind, splits)
        trace.events.append(("test_metric", ind.record.index, 0))
    trace.per_generation_best.append(min(i.fitness for i in pop))

    for gen in range(1, params.generations + 1):
        children: list[Genome] = []
        while len(children) < params.offspring:
            pa = _tournament(pop, rng)
            pb = _tournament(pop, rng)
            if rng.random() < params.p_crossover:
                bits1, bits2 = arch_crossover(pa.genome.bits, pb.genome.bits, rng)
                lam1, lam2 = sbx_crossover(
                    pa.genome.log10_lambda,
                    pb.genome.log10_lambda,
                    params.eta_crossover,
                    bounds,
                    rng,
                )
            else:
                bits1, bits2 = pa.genome.bits, pb.genome.bits
                lam1, lam2 = pa.genome.log10_lambda, pb.genome.log10_lambda
            for bits, lam in ((bits1, lam1), (bits2, lam2)):
                bits = arch_mutation(bits, params.p_mutation, rng)
                if rng.random() < params.p_mutation:
                    lam = poly_mutation(lam, params.eta_mutation, bounds, rng)
                children.append(Genome(bits, lam))
        children = children[: params.offspring]

        offspring: list[Individual] = []
        for genome in children:
            ind = evaluate(
                genome,
                splits,
                use_hls,
                trainer_cfg,
                hls_cfg,
                stream_seed(seed, "train", eval_idx),
                index=eval_idx,
            )
            trace.events.append(("eval", eval_idx, gen))
            trace.evaluations.append(ind.record)
            offspring.append(ind)
            eval_idx += 1

        for child in offspring:
            worst = max(range(len(pop)), key=lambda k: pop[k].fitness)
            if child.fitness < pop[worst].fitness:
                pop[worst] = child
        trace.events.append(("replace", gen))
        for child in offspring:
            _fill_test_metrics(child, splits)
            trace.events.append(("test_metric", child.record.index, gen))
        trace.per_generation_best.append(min(i.fitness for i in pop))

    trace.total_models = params.population + params.generations * params.offspring
    return trace


def grid_genomes() -> list[Genome]:
    """The fixed 40-point grid: 8 architectures times 5 penalty values."""
    out = []
    for layers in GRID_LAYERS:
        for n in GRID_NEURONS:
            for log_lam in GRID_LOG_LAMBDAS:
                out.append(encode_genome(layers, (n,) * layers, log_lam))
    return out


def grid_search(
    splits: DatasetSplits,
    use_hls: bool,
    budget: int = 40,
    trainer_cfg: TrainConfig = TrainConfig(),
    hls_cfg: HlsConfig = HlsConfig(),
    seed: int = 0,
) -> SearchTrace:
    """Deterministic grid; the seed only affects training initialization."""
    genomes = grid_genomes()
    if budget != len(genomes):
        raise ConfigError(
            f"the fixed grid evaluates exactly {len(genomes)} models, got budget={budget}"
        )
    trace = SearchTrace()
    for idx, genome in enumerate(genomes):
        ind = evaluate(
            genome,
            splits,
            use_hls,
            trainer_cfg,
            hls_cfg,
            stream_seed(seed, "grid", idx),
            index=idx,
        )
        trace.events.append(("eval", idx, 0))
        trace.evaluations.append(ind.record)
        trace.events.append(("replace", 0))
        _fill_test_metrics(ind, splits)
        trace.events.append(("test_metric", idx, 0))
    trace.total_models = len(genomes)
    return trace


def random_search(
    splits: DatasetSplits,
    use_hls: bool,
    budget: int = 40,
    trainer_cfg: TrainConfig = TrainConfig(),
    hls_cfg: HlsConfig = HlsConfig(),
    seed: int = 0,
) -> SearchTrace:
    """Uniformly sampled genomes; identical genome sequence for a seed."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    rng = stream_rng(seed, "random")
    trace = SearchTrace()
    for idx in range(budget):
        ind = evaluate(
            random_genome(rng),
            splits,
            use_hls,
            trainer_cfg,
            hls_cfg,
            stream_seed(seed, "train", idx),
            index=idx,
        )
        trace.events.append(("eval", idx, 0))
        trace.evaluations.append(ind.record)
        trace.events.append(("replace", 0))
        _fill_test_metrics(ind, splits)
        trace.events.append(("test_metric", idx, 0))
    trace.total_models = budget
    return trace


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_trace_csv(trace: SearchTrace, path) -> None:
    """One row per evaluation, in evaluation order."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            "index,bits,log10_lambda,arch,lambda_eff,fitness,val_acc,test_acc,"
            "hls_used,t_star\n"
        )
        for r in trace.evaluations:
            arch = "-".join(str(d) for d in r.arch)
            lam_eff = ";".join(_fmt(v) for v in r.lambda_eff)
            test_acc = math.nan if r.test_acc is None else r.test_acc
            fh.write(
                f"{r.index},{r.bits},{_fmt(r.log10_lambda)},{arch},{lam_eff},"
                f"{_fmt(r.fitness)},{_fmt(r.val_acc)},{_fmt(test_acc)},"
                f"{int(r.hls_used)},{_fmt(r.t_star)}\n"
            )


def write_gen_best_csv(trace: SearchTrace, path) -> None:
    """Generation index (0 = initial population) and best validation loss."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("generation,best_val_loss\n")
        for gen, best in enumerate(trace.per_generation_best):
            fh.write(f"{gen},{_fmt(best)}\n")
