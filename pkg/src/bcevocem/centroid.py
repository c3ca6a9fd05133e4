"""Performance weights, weighted Bregman centroid, information radius and scores.

Centroid geometry uses the mean block of each worker. With the default
fixed-variance potential the mean parameter of a worker is its Gaussian mean,
so the centroid is a weighted arithmetic mean of worker means and each worker's
divergence to it is a scaled squared distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .expfam import (
    DiagGaussian,
    DimensionError,
    FixedVarianceGaussian,
    FloatArray,
    Potential,
)

WEIGHT_FLOOR = 1e-12


@dataclass
class WorkerState:
    dist: DiagGaussian
    population_costs: FloatArray = field(default_factory=lambda: np.empty(0))
    weight: float = 0.0
    id: int = 0
    _mean_cost: float | None = field(default=None, repr=False, compare=False)

    @property
    def mean_cost(self) -> float:
        """Arithmetic mean of the latest population's costs (inf before sampling)."""
        if self._mean_cost is None:
            n = self.population_costs.size
            self._mean_cost = float(self.population_costs.sum() / n) if n else float("inf")
        return self._mean_cost


@dataclass
class Centroid:
    eta_c: FloatArray
    information_radius: float
    potential: Potential
    weights: FloatArray
    _theta_c: FloatArray | None = field(default=None, repr=False)
    scores: FloatArray | None = field(default=None, repr=False)

    @property
    def theta_c(self) -> FloatArray:
        if self._theta_c is None:
            self._theta_c = self.potential.grad_psi_star(self.eta_c)
        return self._theta_c


def _quantile(sorted_c: list[float], q: float) -> float:
    # linear interpolation between order statistics (numpy's default method)
    pos = q * (len(sorted_c) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_c) - 1)
    return sorted_c[lo] + (pos - lo) * (sorted_c[hi] - sorted_c[lo])


def _as_cost_list(mean_costs: ArrayLike) -> list[float]:
    if isinstance(mean_costs, list) and all(type(c) is float for c in mean_costs):
        return mean_costs
    return np.asarray(mean_costs, dtype=np.float64).ravel().tolist()


def adaptive_temperature(mean_costs: ArrayLike, scale: float = 1.0) -> float:
    """``scale`` times the interquartile range of the costs.

    Falls back to the standard deviation, then to 1.0, when the IQR vanishes.
    """
    c = sorted(_as_cost_list(mean_costs))
    n = len(c)
    if n == 1:
        return scale
    spread = _quantile(c, 0.75) - _quantile(c, 0.25)
    if not spread > 0:
        spread = float(np.std(c))
    if not spread > 0:
        spread = 1.0
    return scale * spread


def performance_weights(mean_costs: ArrayLike, temperature: float | str = "adaptive") -> FloatArray:
    """Softmax of negative mean costs, ``w_i ∝ exp(-c_i / temperature)``.

    Weights below ``WEIGHT_FLOOR`` are clamped and the vector renormalised.
    ``temperature="adaptive"`` uses :func:`adaptive_temperature`.
    """
    # one entry per worker, so plain floats beat array overhead here
    c = _as_cost_list(mean_costs)
    if not c:
        raise ValueError("performance_weights needs at least one cost")
    # a non-finite entry makes the sum non-finite; overflow alone does not raise
    if not math.isfinite(sum(c)) and not all(map(math.isfinite, c)):
        raise ValueError(f"non-finite mean cost: {c}")
    if isinstance(temperature, str):
        if temperature != "adaptive":
            raise ValueError(f"unknown temperature {temperature!r}")
        temperature = adaptive_temperature(c)
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    lo = min(c)
    w = [math.exp((lo - x) / temperature) for x in c]
    total = sum(w)
    w = [x / total for x in w]
    if min(w) < WEIGHT_FLOOR:
        w = [max(x, WEIGHT_FLOOR) for x in w]
        total = sum(w)
        w = [x / total for x in w]
    return np.array(w)


def default_potential(dim: int) -> FixedVarianceGaussian:
    return FixedVarianceGaussian(np.ones(dim))


def _stack_means(workers: Sequence[WorkerState]) -> FloatArray:
    dims = {w.dist.dim for w in workers}
    if len(dims) != 1:
        raise DimensionError(f"workers have mixed dimensions {sorted(dims)}")
    return np.stack([w.dist.mean for w in workers])


def _to_natural(potential: Potential, etas: FloatArray) -> FloatArray:
    if isinstance(potential, FixedVarianceGaussian):
        return etas * potential._inv
    return np.stack([potential.grad_psi_star(e) for e in etas])


def _divergences(potential: Potential, etas: FloatArray, eta_c: FloatArray, theta_c: FloatArray | None = None) -> FloatArray:
    """Row-wise ``D_Psi(theta_i || theta_c)`` for points and centre in mean coordinates."""
    if isinstance(potential, FixedVarianceGaussian):
        # 0.5 sum s2 (theta_i - theta_c)^2 == 0.5 sum (eta_i - eta_c)^2 / s2
        diff = etas - eta_c
        return (diff * diff) @ potential._half_inv
    thetas = _to_natural(potential, etas)
    if theta_c is None:
        theta_c = potential.grad_psi_star(eta_c)
    psi_c = potential.psi(theta_c)
    out = np.array([potential.psi(t) for t in thetas]) - psi_c - (thetas - theta_c) @ eta_c
    return np.maximum(out, 0.0)


def centroid_from_means(etas: ArrayLike, weights: ArrayLike, potential: Potential) -> Centroid:
    """Weighted right-sided Bregman centroid of points given in mean coordinates.

    ``eta_c = sum_i w_i eta_i``; the information radius is
    ``sum_i w_i D_Psi(theta_i || theta_c)``.
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=np.float64))
    w = np.asarray(weights, dtype=np.float64).ravel()
    if etas.shape[0] != w.size:
        raise DimensionError(f"{etas.shape[0]} points but {w.size} weights")
    if etas.shape[1] != potential.dim:
        raise DimensionError(f"points have dimension {etas.shape[1]}, potential has {potential.dim}")
    total = w.sum()
    if w.min() < 0 or not total > 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    return _centroid(etas, w / total, potential)


def _centroid(etas: FloatArray, w: FloatArray, potential: Potential) -> Centroid:
    # unchecked core: w normalised, etas (n, dim) float64
    eta_c = w @ etas
    gamma = w * _divergences(potential, etas, eta_c)
    return Centroid(eta_c=eta_c, information_radius=float(gamma.sum()), potential=potential, weights=w, scores=gamma)


def weighted_centroid(workers: Sequence[WorkerState], potential: Potential | None = None) -> Centroid:
    """Centroid of the workers' mean blocks under their current ``weight`` fields."""
    if not workers:
        raise ValueError("no workers")
    etas = _stack_means(workers)
    potential = potential or default_potential(etas.shape[1])
    weights = np.array([w.weight for w in workers], dtype=np.float64)
    if not weights.sum() > 0:
        raise ValueError("all worker weights are zero")
    return centroid_from_means(etas, weights, potential)


def relevance_scores(workers: Sequence[WorkerState], centroid: Centroid) -> FloatArray:
    """``gamma_i = w_i D_Psi(theta_i || theta_c)``; they sum to the information radius."""
    return centroid.weights * _divergences(centroid.potential, _stack_means(workers), centroid.eta_c, centroid.theta_c)


def divergence_to_centroid(eta: ArrayLike, centroid: Centroid) -> float:
    """``D_Psi(theta || theta_c)`` for a single point given in mean coordinates."""
    etas = np.atleast_2d(np.asarray(eta, dtype=np.float64))
    return float(_divergences(centroid.potential, etas, centroid.eta_c, centroid._theta_c)[0])


def information_radius(workers: Sequence[WorkerState], centroid: Centroid) -> float:
    return float(np.sum(relevance_scores(workers, centroid)))


def likelihood_rank_scores(workers: Sequence[WorkerState], centroid: Centroid) -> FloatArray:
    """``-w_i l(theta_i; eta_c) = w_i [Psi(theta_i) - <theta_i, eta_c>]``.

    Differs from :func:`relevance_scores` by ``w_i * const`` per worker, so the
    two orderings coincide whenever the weights are equal.
    """
    pot = centroid.potential
    thetas = _to_natural(pot, _stack_means(workers))
    psi = np.array([pot.psi(t) for t in thetas])
    return centroid.weights * (psi - thetas @ centroid.eta_c)


def argmin_lowest_id(scores: ArrayLike, ids: Sequence[int], k: int = 1) -> list[int]:
    """Positions of the ``k`` smallest scores; ties go to the lowest worker id."""
    if not isinstance(scores, list):
        scores = np.asarray(scores).tolist()
    order = sorted(range(len(scores)), key=lambda i: (scores[i], ids[i]))
    return order[:k]
