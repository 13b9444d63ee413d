"""Derive independent random streams from a master seed."""

from enum import IntEnum

import numpy as np

from .errors import ConfigError


class Stream(IntEnum):
    """Identifiers that keep each consumer's random stream independent."""

    SPLIT = 1
    OVERSAMPLE = 2
    SMOTE = 3
    TREE = 4
    FOREST = 5
    BOOST = 6
    FOLDS = 7
    STACK_FOLD = 8
    STACK_REFIT = 9
    STACK_META = 10
    BASE = 11
    DUMMY = 12
    SYNTHETIC = 13


def _sequence(
    seed: int, stream: Stream, counters: tuple[int, ...]
) -> np.random.SeedSequence:
    if seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed}")

    return np.random.SeedSequence([seed, int(stream), *counters])


def derive_rng(seed: int, stream: Stream, *counters: int) -> np.random.Generator:
    """Return a generator keyed by (seed, stream, counters)."""
    return np.random.default_rng(_sequence(seed, stream, counters))


def derive_seed(seed: int, stream: Stream, *counters: int) -> int:
    """Return an integer sub-seed keyed by (seed, stream, counters)."""
    state = _sequence(seed, stream, counters).generate_state(1, dtype=np.uint64)
    return int(state[0])
