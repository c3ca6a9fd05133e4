"""Seeded random streams.

Every stochastic component takes a :class:`numpy.random.Generator`. Streams are
derived from a master seed plus a key path, so each worker owns an independent
stream that does not depend on execution order.
"""

from __future__ import annotations

import numpy as np

RngStream = np.random.Generator

INIT_STREAM = 0xC0FFEE


def make_rng(seed: int) -> RngStream:
    return np.random.Generator(np.random.PCG64(seed))


def derive_rng(seed: int, *key: int) -> RngStream:
    """Independent stream for ``(seed, *key)``; e.g. ``derive_rng(seed, worker_id)``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
