"""Seed handling.

All randomized operations take an explicit ``seed`` and draw from a Philox
counter-based generator, so independent streams can be derived by spawning
SeedSequences (used by the experiment driver to make results independent of
worker scheduling).
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng"]


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed Generator for ``seed``.

    ``seed`` may be an int, a ``numpy.random.SeedSequence``, or an existing
    ``Generator`` (returned as-is so callers can thread one stream through
    several draws).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
