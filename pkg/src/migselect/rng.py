"""Deterministic random-stream derivation.

All randomness in the package flows from a single integer master seed.
Independent substreams are derived from (seed, stream label, index) so
that results are reproducible regardless of execution order or the
number of worker processes.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream_seq(seed: int, label: str, index: int = 0) -> np.random.SeedSequence:
    """SeedSequence for the substream identified by (seed, label, index)."""
    return np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8")), int(index)])


def substream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for the substream identified by (seed, label, index)."""
    return np.random.default_rng(substream_seq(seed, label, index))
