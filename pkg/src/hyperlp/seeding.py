"""Deterministic seed derivation.

A run has one master seed. Every stochastic consumer draws from a named
substream derived as SeedSequence(master, spawn_key=(index, *extra))
where `index` is the consumer's fixed position in _STREAMS. New
consumers are appended to the tuple, so adding one never perturbs the
streams of existing consumers.
"""

from __future__ import annotations

import numpy as np

_STREAMS = (
    "split",
    "synth",
    "init",
    "train",
    "ga",
    "grid",
    "random",
    "hls",
)


def substream(master: int, name: str, *extra: int) -> np.random.SeedSequence:
    if name not in _STREAMS:
        raise KeyError(f"unknown seed stream {name!r}")
    return np.random.SeedSequence(master, spawn_key=(_STREAMS.index(name), *extra))


def stream_seed(master: int, name: str, *extra: int) -> int:
    """64-bit integer seed for consumers that take plain ints."""
    return int(substream(master, name, *extra).generate_state(1, dtype=np.uint64)[0])


def stream_rng(master: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(substream(master, name, *extra))
