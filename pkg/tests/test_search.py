import math

import numpy as np
import pytest

from hyperlp.datasets import make_splits, synth_gaussians
from hyperlp.errors import ConfigError, DimensionError
from hyperlp.hls import HlsConfig
from hyperlp.mlp import TrainConfig
from hyperlp.search import (
    GENOME_BITS,
    GaParams,
    Genome,
    SearchTrace,
    arch_crossover,
    arch_mutation,
    decode_architecture,
    encode_genome,
    evaluate,
    grid_genomes,
    grid_search,
    micro_ga,
    poly_mutation,
    random_genome,
    random_search,
    sbx_crossover,
    write_gen_best_csv,
    write_trace_csv,
)


class StubRng:
    """Deterministic stand-in feeding preset draws to the operators."""

    def __init__(self, randoms=(), integers=()):
        self._randoms = list(randoms)
        self._integers = list(integers)

    def random(self, size=None):
        if size is None:
            return self._randoms.pop(0)
        return np.array([self._randoms.pop(0) for _ in range(size)])

    def integers(self, lo, hi=None, size=None):
        return self._integers.pop(0)


@pytest.fixture(scope="module")
def tiny_splits():
    source = synth_gaussians(140, 6, 2, separation=8.0, seed=77)
    return make_splits(source, 70, 35, 35, seed=2)


FAST_TRAIN = TrainConfig(learning_rate=0.02, epochs=3)
FAST_HLS = HlsConfig(t_steps=6)


def test_genome_decoding_drops_zero_fields():
    g = encode_genome(2, (5, 0, 7), -2.0)
    assert g.layer_count == 2
    assert g.neuron_fields == (5, 0, 7)
    assert g.hidden_sizes == (5,)  # zero field dropped, third field unused
    arch = decode_architecture(g, input_dim=9, output_dim=3)
    assert arch.layer_dims == [9, 5, 3]


def test_genome_zero_layers_is_softmax_regression():
    g = encode_genome(0, (9, 9, 9), -1.0)
    assert g.hidden_sizes == ()
    assert decode_architecture(g, 4, 2).layer_dims == [4, 2]


def test_genome_encode_decode_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        L = int(rng.integers(0, 4))
        neurons = tuple(int(v) for v in rng.integers(0, 16, size=3))
        g = encode_genome(L, neurons, -3.0)
        assert g.layer_count == L
        assert g.neuron_fields == neurons


def test_genome_validation():
    with pytest.raises(DimensionError):
        Genome((0, 1), -1.0)
    with pytest.raises(DimensionError):
        Genome((2,) * GENOME_BITS, -1.0)
    with pytest.raises(DimensionError):
        Genome((0,) * GENOME_BITS, math.inf)


def test_sbx_equal_parents_fixed_point():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = float(rng.uniform(-3, 0))
        c1, c2 = sbx_crossover(a, a, 15.0, (-6.0, 0.0), rng)
        assert c1 == a and c2 == a


def test_sbx_mean_preservation_fuzz():
    rng = np.random.default_rng(2)
    wide = (-1e9, 1e9)  # clipping cannot trigger
    for _ in range(10_000):
        a, b = rng.uniform(-5, 5, size=2)
        c1, c2 = sbx_crossover(a, b, 15.0, wide, rng)
        assert abs((c1 + c2) - (a + b)) <= 1e-12 * max(1.0, abs(a + b))


def test_sbx_half_draw_returns_parents():
    c1, c2 = sbx_crossover(-3.0, -1.0, 15.0, (-6.0, 0.0), StubRng(randoms=[0.5]))
    assert sorted((c1, c2)) == [-3.0, -1.0]  # beta = 1 at u = 0.5


def test_sbx_respects_bounds_fuzz():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        a, b = rng.uniform(-6, 0, size=2)
        c1, c2 = sbx_crossover(a, b, 15.0, (-6.0, 0.0), rng)
        assert -6.0 <= c1 <= 0.0 and -6.0 <= c2 <= 0.0


def test_poly_mutation_center_draw_is_identity():
    x = poly_mutation(-2.5, 20.0, (-6.0, 0.0), StubRng(randoms=[0.5]))
    assert x == -2.5


def test_poly_mutation_bounds_fuzz():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        x = float(rng.uniform(-6, 0))
        y = poly_mutation(x, 20.0, (-6.0, 0.0), rng)
        assert -6.0 <= y <= 0.0
    # sitting exactly on a bound never escapes it
    for _ in range(1000):
        assert poly_mutation(-6.0, 20.0, (-6.0, 0.0), rng) >= -6.0
        assert poly_mutation(0.0, 20.0, (-6.0, 0.0), rng) <= 0.0


def test_poly_mutation_symmetric_at_midpoint():
    rng = np.random.default_rng(5)
    mid = 0.5
    draws = [poly_mutation(mid, 20.0, (0.0, 1.0), rng) for _ in range(10_000)]
    assert abs(np.mean(draws) - mid) <= 0.02 * mid


def test_arch_crossover_suffix_exchange_at_cut_two():
    a = (0,) * GENOME_BITS
    b = (1,) * GENOME_BITS
    c1, c2 = arch_crossover(a, b, StubRng(integers=[2]))
    assert c1 == (0, 0) + (1,) * 12
    assert c2 == (1, 1) + (0,) * 12


def test_arch_crossover_identical_parents():
    rng = np.random.default_rng(6)
    a = tuple(int(v) for v in rng.integers(0, 2, size=GENOME_BITS))
    c1, c2 = arch_crossover(a, a, rng)
    assert c1 == a and c2 == a


def test_arch_crossover_positionwise_multiset_preserved_fuzz():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        a = tuple(int(v) for v in rng.integers(0, 2, size=GENOME_BITS))
        b = tuple(int(v) for v in rng.integers(0, 2, size=GENOME_BITS))
        c1, c2 = arch_crossover(a, b, rng)
        for i in range(GENOME_BITS):
            assert sorted((c1[i], c2[i])) == sorted((a[i], b[i]))


def test_arch_mutation_extremes():
    rng = np.random.default_rng(8)
    bits = tuple(int(v) for v in rng.integers(0, 2, size=GENOME_BITS))
    assert arch_mutation(bits, 0.0, rng) == bits
    assert arch_mutation(bits, 1.0, rng) == tuple(1 - b for b in bits)


def test_arch_mutation_flip_rate():
    rng = np.random.default_rng(9)
    bits = (0,) * GENOME_BITS
    flips = [sum(arch_mutation(bits, 0.1, rng)) for _ in range(10_000)]
    assert abs(np.mean(flips) - 1.4) <= 0.1


def test_random_genome_lambda_distribution():
    rng = np.random.default_rng(10)
    vals = [random_genome(rng).log10_lambda for _ in range(10_000)]
    assert abs(np.mean(vals) - (-3.0)) <= 0.05


def test_evaluate_separable_data_perfect_accuracy(tiny_splits):
    genome = encode_genome(1, (6,), -5.0)
    cfg = TrainConfig(learning_rate=0.02, epochs=40)
    ind = evaluate(genome, tiny_splits, False, cfg, FAST_HLS, 3)
    assert ind.val_acc == 1.0


def test_evaluate_hls_never_worse(tiny_splits):
    rng = np.random.default_rng(11)
    for k in range(4):
        genome = random_genome(rng)
        base = evaluate(genome, tiny_splits, False, FAST_TRAIN, FAST_HLS, 100 + k)
        tuned = evaluate(genome, tiny_splits, True, FAST_TRAIN, FAST_HLS, 100 + k)
        assert tuned.fitness <= base.fitness


def test_micro_ga_budget_and_elitism(tiny_splits):
    params = GaParams(population=4, generations=3)
    trace = micro_ga(tiny_splits, False, params, FAST_TRAIN, FAST_HLS, seed=5)
    assert trace.total_models == 4 + 3 * 2
    assert len(trace.evaluations) == trace.total_models
    best = trace.per_generation_best
    assert len(best) == params.generations + 1
    assert all(a >= b for a, b in zip(best, best[1:]))


def test_micro_ga_trace_audit_test_metrics_after_replacement(tiny_splits):
    params = GaParams(population=3, generations=2)
    trace = micro_ga(tiny_splits, False, params, FAST_TRAIN, FAST_HLS, seed=6)
    by_gen = {}
    for pos, event in enumerate(trace.events):
        kind, *rest = event
        gen = rest[-1] if kind != "replace" else rest[0]
        by_gen.setdefault(gen, {}).setdefault(kind, []).append(pos)
    for gen, kinds in by_gen.items():
        assert max(kinds["eval"]) < kinds["replace"][0]
        assert kinds["replace"][0] < min(kinds["test_metric"])
    # test metrics were written for every evaluation
    assert all(r.test_acc is not None for r in trace.evaluations)


def test_micro_ga_deterministic(tiny_splits):
    params = GaParams(population=3, generations=2)
    a = micro_ga(tiny_splits, False, params, FAST_TRAIN, FAST_HLS, seed=7)
    b = micro_ga(tiny_splits, False, params, FAST_TRAIN, FAST_HLS, seed=7)
    assert [r.bits for r in a.evaluations] == [r.bits for r in b.evaluations]
    assert [r.fitness for r in a.evaluations] == [r.fitness for r in b.evaluations]
    c = micro_ga(tiny_splits, False, params, FAST_TRAIN, FAST_HLS, seed=8)
    assert [r.bits for r in a.evaluations] != [r.bits for r in c.evaluations]


def test_grid_is_forty_and_seed_independent(tiny_splits):
    genomes = grid_genomes()
    assert len(genomes) == 40
    assert len({(g.bits, g.log10_lambda) for g in genomes}) == 40
    with pytest.raises(ConfigError):
        grid_search(tiny_splits, False, budget=20)


def test_random_search_deterministic_sequence(tiny_splits):
    a = random_search(tiny_splits, False, 5, FAST_TRAIN, FAST_HLS, seed=3)
    b = random_search(tiny_splits, False, 5, FAST_TRAIN, FAST_HLS, seed=3)
    assert a.total_models == 5
    assert [r.bits for r in a.evaluations] == [r.bits for r in b.evaluations]
    assert [r.fitness for r in a.evaluations] == [r.fitness for r in b.evaluations]


def test_trace_csv_writers(tmp_path, tiny_splits):
    trace = random_search(tiny_splits, False, 3, FAST_TRAIN, FAST_HLS, seed=4)
    trace.per_generation_best = [1.0, 0.5]
    tpath = tmp_path / "trace.csv"
    gpath = tmp_path / "gen_best.csv"
    write_trace_csv(trace, tpath)
    write_gen_best_csv(trace, gpath)
    tlines = tpath.read_text().strip().split("\n")
    assert tlines[0].startswith("index,bits,log10_lambda,arch")
    assert len(tlines) == 4
    glines = gpath.read_text().strip().split("\n")
    assert glines == ["generation,best_val_loss", "0,1", "1,0.5"]


def test_best_record_ignores_divergent_entries():
    trace = SearchTrace()
    from hyperlp.search import EvalRecord

    trace.evaluations = [
        EvalRecord(0, "0" * 14, -1.0, (2, 2), [0.1], math.inf, math.nan, None, False, math.nan),
        EvalRecord(1, "0" * 14, -1.0, (2, 2), [0.1], 0.7, 0.5, None, False, math.nan),
    ]
    assert trace.best_record().index == 1
