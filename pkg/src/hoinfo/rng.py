"""Deterministic random-number streams.

A stream is identified by a 64-bit seed plus an integer path; identical
identities always reproduce identical draw sequences, and ``child`` derives
statistically independent substreams without mutable shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Value-semantics handle on a reproducible random stream."""

    seed: int
    stream: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if any(k < 0 or k >= 2**32 for k in self.stream):
            raise ValueError("stream path entries must be uint32")

    def child(self, *keys: int) -> "RngStream":
        """Derive an independent substream; same keys give the same substream."""
        return RngStream(self.seed, self.stream + tuple(keys))

    def generator(self) -> np.random.Generator:
        """Fresh generator at the start of this stream's sequence."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.stream))
