"""Named sub-streams derived from one master seed.

Every source of randomness in the pipeline (splitting, walks, negative
sampling, model init, ...) pulls its generator from here so a single master
seed makes a whole run replayable.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def substream(seed: int, label: str) -> np.random.Generator:
    """Deterministic generator for `label` under the given master seed."""
    tag = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
