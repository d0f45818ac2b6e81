"""Reproducible random streams.

Every batch of simulation draws comes from its own counter-based Philox
generator, keyed by ``(seed, stream_id, *key)``.  Two batches with different
keys are statistically independent, and a batch can be regenerated exactly
from its key alone, regardless of which worker process ran it or in what
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Purpose", "RngStream"]


class Purpose:
    """Integer tags separating the batches drawn within one iteration."""

    X = 0  # indicator batch for the penalty residual
    X_TILDE = 1  # indicator/score batch for the penalty gradient
    X_TILDE2 = 2  # objective-gradient batch
    TRACE_G = 3
    TRACE_H = 4
    REPORT = 5
    TAU = 6
    SUPPORT = 7
    DATA = 8
    INIT = 9
    ORACLE = 10
    PENALTY = 11


@dataclass(frozen=True)
class RngStream:
    """A seed plus a substream id; hands out keyed generators."""

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def generator(self, *key: int) -> np.random.Generator:
        # the path length separates (path, key) splits that would otherwise coincide
        spawn_key = (int(self.stream_id), len(self.path), *self.path, *map(int, key))
        ss = np.random.SeedSequence(int(self.seed), spawn_key=spawn_key)
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, *key: int) -> "RngStream":
        """A child stream whose generators never collide with the parent's."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(map(int, key)))
