"""Deterministic, resumable random streams.

All randomness in the library flows through :class:`RngState`. A stream is
addressed by a name plus an integer counter (training step, epoch index,
trial number, ...). The generator for a given ``(seed, name, counter)``
triple is constructed from scratch per request, so no mutable RNG state has
to be serialized: a checkpoint only needs to remember the counters.
"""

from __future__ import annotations

import zlib

import numpy as np


def _stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RngState:
    """Root seed plus named counter-based substreams.

    Identical ``(seed, name, counter)`` triples yield bit-identical draw
    sequences on any platform numpy supports.
    """

    def __init__(self, seed: int):
        if not (0 <= int(seed) < 2**63):
            raise ValueError(f"seed must be a non-negative 63-bit integer, got {seed}")
        self.seed = int(seed)

    def stream(self, name: str, counter: int = 0) -> np.random.Generator:
        """Fresh generator for the given stream name and counter."""
        seq = np.random.SeedSequence((self.seed, _stream_id(name), int(counter)))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, name: str, counter: int = 0) -> "RngState":
        """Derive an independent root (for sweep cells, synthetic splits)."""
        sub = np.random.SeedSequence((self.seed, _stream_id(name), int(counter)))
        return RngState(int(sub.generate_state(1, np.uint64)[0] >> 1))

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed})"
