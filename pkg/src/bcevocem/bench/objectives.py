"""Benchmark cost functions."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike


def synthetic_cost(x: ArrayLike) -> float:
    """``sin(3 x1) + cos(3 x2) + 0.5 |x|^2``, a 2-D landscape with several basins."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise ValueError(f"synthetic_cost takes a 2-vector, got shape {x.shape}")
    return float(np.sin(3.0 * x[0]) + np.cos(3.0 * x[1]) + 0.5 * (x @ x))


def quadratic_cost(x: ArrayLike, target: ArrayLike | None = None) -> float:
    """``|x - target|^2`` (target defaults to the origin)."""
    x = np.asarray(x, dtype=np.float64)
    d = x if target is None else x - np.asarray(target, dtype=np.float64)
    return float(d @ d)


OBJECTIVES = {
    "synthetic-multimodal": synthetic_cost,
    "quadratic": quadratic_cost,
}
