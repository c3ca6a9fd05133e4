"""Exponential-family potentials, dual coordinates and Bregman divergences.

Everything here is specialised to diagonal Gaussians. Two potentials are
provided:

* :class:`FixedVarianceGaussian` -- the cumulant of ``N(mu, diag(sigma2))`` with
  the variance held fixed. It is quadratic, so mean and natural coordinates are
  related by a diagonal scaling. This is the geometry used by the centroid and
  trust-region machinery.
* :class:`DiagGaussianPotential` -- the full (mean + variance) cumulant over the
  natural vector ``[theta1, theta2]``. It is non-quadratic and exists for
  divergence / round-trip checks and as a curved test geometry.

Constant convention: additive constants such as ``d/2 * log(2 pi)`` are dropped
from every cumulant. Divergences and rankings are unaffected. The conjugate of
each potential is its exact Legendre transform under that convention, so the
Fenchel-Young equality ``Psi(theta) + Psi*(eta) = <theta, eta>`` holds at
matched coordinates. Log-likelihoods are reported without the base-measure term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

VARIANCE_FLOOR = 1e-6

FloatArray = NDArray[np.float64]


class DomainError(ValueError):
    """A point lies outside the domain of a potential."""


class DimensionError(ValueError):
    """Vectors have incompatible dimensions."""


def _vec(x: ArrayLike) -> FloatArray:
    return np.atleast_1d(np.asarray(x, dtype=np.float64))


class Potential:
    """A strictly convex potential together with its convex conjugate.

    Subclasses implement the cumulant ``psi`` on natural coordinates and its
    conjugate ``psi_star`` on mean coordinates, with gradients and the conjugate
    Hessian. ``dual()`` swaps the two so that divergences in mean space can be
    taken with the same :func:`bregman_divergence`.
    """

    dim: int

    def psi(self, theta: FloatArray) -> float:
        raise NotImplementedError

    def grad_psi(self, theta: FloatArray) -> FloatArray:
        raise NotImplementedError

    def psi_star(self, eta: FloatArray) -> float:
        raise NotImplementedError

    def grad_psi_star(self, eta: FloatArray) -> FloatArray:
        raise NotImplementedError

    def hess_psi_star(self, eta: FloatArray) -> FloatArray:
        raise NotImplementedError

    def in_natural_domain(self, theta: FloatArray) -> bool:
        return bool(np.all(np.isfinite(theta)))

    def in_mean_domain(self, eta: FloatArray) -> bool:
        return bool(np.all(np.isfinite(eta)))

    def dual(self) -> Potential:
        return _DualPotential(self)

    # -- checked helpers -------------------------------------------------

    def _check(self, x: ArrayLike, natural: bool) -> FloatArray:
        x = _vec(x)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        ok = self.in_natural_domain(x) if natural else self.in_mean_domain(x)
        if not ok:
            space = "natural" if natural else "mean"
            raise DomainError(f"point outside the {space} domain of {type(self).__name__}: {x}")
        return x


class _DualPotential(Potential):
    def __init__(self, base: Potential):
        self.base = base
        self.dim = base.dim

    def psi(self, theta):
        return self.base.psi_star(theta)

    def grad_psi(self, theta):
        return self.base.grad_psi_star(theta)

    def psi_star(self, eta):
        return self.base.psi(eta)

    def grad_psi_star(self, eta):
        return self.base.grad_psi(eta)

    def hess_psi_star(self, eta):
        h = self.base.hess_psi_star(self.base.grad_psi(eta))
        return 1.0 / h if h.ndim == 1 else np.linalg.inv(h)

    def in_natural_domain(self, theta):
        return self.base.in_mean_domain(theta)

    def in_mean_domain(self, eta):
        return self.base.in_natural_domain(eta)

    def dual(self):
        return self.base


class SquaredNorm(Potential):
    """``F(x) = scale * ||x||^2``; its divergence is ``scale * ||x - y||^2``."""

    def __init__(self, dim: int, scale: float = 1.0):
        if dim < 1 or scale <= 0:
            raise ValueError("dim must be >= 1 and scale > 0")
        self.dim = dim
        self.scale = float(scale)

    def psi(self, theta):
        return float(self.scale * theta @ theta)

    def grad_psi(self, theta):
        return 2.0 * self.scale * theta

    def psi_star(self, eta):
        return float(eta @ eta / (4.0 * self.scale))

    def grad_psi_star(self, eta):
        return eta / (2.0 * self.scale)

    def hess_psi_star(self, eta):
        return np.full(self.dim, 1.0 / (2.0 * self.scale))


class FixedVarianceGaussian(Potential):
    """Cumulant of ``N(mu, diag(sigma2))`` with ``sigma2`` held fixed.

    Natural parameter ``theta = mu / sigma2``, mean parameter ``eta = mu``::

        Psi(theta)  = 1/2 sum sigma2_i theta_i^2
        Psi*(eta)   = 1/2 sum eta_i^2 / sigma2_i

    The conjugate Hessian is ``diag(1 / sigma2)`` and is returned as a vector.
    """

    def __init__(self, sigma2: ArrayLike):
        s = _vec(sigma2)
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise DomainError(f"variances must be positive, got {s}")
        self.sigma2 = np.maximum(s, VARIANCE_FLOOR)
        self._inv = 1.0 / self.sigma2
        # reused by the centroid and box-sampler hot paths
        self._half_inv = 0.5 * self._inv
        self._std = np.sqrt(self.sigma2)
        self.dim = s.size

    @classmethod
    def isotropic(cls, dim: int, variance: float = 1.0) -> FixedVarianceGaussian:
        return cls(np.full(dim, float(variance)))

    def psi(self, theta):
        return 0.5 * float((theta * theta) @ self.sigma2)

    def grad_psi(self, theta):
        return self.sigma2 * theta

    def psi_star(self, eta):
        return 0.5 * float((eta * eta) @ self._inv)

    def grad_psi_star(self, eta):
        return eta * self._inv

    def hess_psi_star(self, eta):
        return self._inv.copy()


class DiagGaussianPotential(Potential):
    """Full cumulant of a ``d``-dimensional diagonal Gaussian.

    Natural vector ``[theta1, theta2]`` with ``theta1 = mu / s2`` and
    ``theta2 = -1 / (2 s2)``; mean vector ``[mu, mu^2 + s2]``::

        Psi(theta) = sum( -theta1^2 / (4 theta2) - 1/2 log(-2 theta2) )
        Psi*(eta)  = sum( -1/2 - 1/2 log(eta2 - eta1^2) )

    ``hess_psi_star`` returns the dense ``2d x 2d`` matrix.
    """

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = d
        self.dim = 2 * d

    def _split(self, x):
        return x[: self.d], x[self.d :]

    def in_natural_domain(self, theta):
        return bool(np.all(np.isfinite(theta)) and np.all(theta[self.d :] < 0))

    def in_mean_domain(self, eta):
        e1, e2 = self._split(eta)
        return bool(np.all(np.isfinite(eta)) and np.all(e2 - e1 * e1 > 0))

    def psi(self, theta):
        t1, t2 = self._split(theta)
        return float(np.sum(-t1 * t1 / (4.0 * t2) - 0.5 * np.log(-2.0 * t2)))

    def grad_psi(self, theta):
        t1, t2 = self._split(theta)
        mu = -t1 / (2.0 * t2)
        s2 = -1.0 / (2.0 * t2)
        return np.concatenate([mu, mu * mu + s2])

    def psi_star(self, eta):
        e1, e2 = self._split(eta)
        return float(np.sum(-0.5 - 0.5 * np.log(e2 - e1 * e1)))

    def grad_psi_star(self, eta):
        e1, e2 = self._split(eta)
        s = e2 - e1 * e1
        return np.concatenate([e1 / s, -0.5 / s])

    def hess_psi_star(self, eta):
        e1, e2 = self._split(eta)
        s = e2 - e1 * e1
        d = self.d
        h = np.zeros((2 * d, 2 * d))
        idx = np.arange(d)
        h[idx, idx] = 1.0 / s + 2.0 * e1 * e1 / (s * s)
        h[idx, idx + d] = h[idx + d, idx] = -e1 / (s * s)
        h[idx + d, idx + d] = 0.5 / (s * s)
        return h


@dataclass
class DiagGaussian:
    """A diagonal Gaussian carried in both moment and natural form.

    Variances are floored at ``VARIANCE_FLOOR`` on construction.
    """

    mean: FloatArray
    variance: FloatArray
    variance_frozen: bool = False

    def __post_init__(self):
        self.mean = np.array(self.mean, dtype=np.float64, ndmin=1)
        if self.mean.ndim != 1 or self.mean.size == 0:
            raise DimensionError("mean must be a non-empty vector")
        var = np.array(self.variance, dtype=np.float64, ndmin=1)
        if var.shape != self.mean.shape:
            var = np.broadcast_to(var, self.mean.shape).copy()
        # one pass: nan/inf anywhere propagate into the sum
        if not np.isfinite(self.mean.sum() + var.sum()) and not (
            np.isfinite(self.mean).all() and np.isfinite(var).all()
        ):
            raise DomainError("mean and variance must be finite")
        if var.min() <= 0:
            raise DomainError(f"variance must be positive, got {var}")
        self.variance = np.maximum(var, VARIANCE_FLOOR)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def std(self) -> FloatArray:
        return np.sqrt(self.variance)

    def natural(self) -> FloatArray:
        """``[mu / s2, -1 / (2 s2)]``."""
        return np.concatenate([self.mean / self.variance, -0.5 / self.variance])

    def mean_params(self) -> FloatArray:
        """``[mu, mu^2 + s2]`` (the expected sufficient statistics)."""
        return np.concatenate([self.mean, self.mean * self.mean + self.variance])

    @classmethod
    def from_natural(cls, theta: ArrayLike, variance_frozen: bool = False) -> DiagGaussian:
        theta = _vec(theta)
        if theta.size % 2:
            raise DimensionError("natural vector must have even length [theta1, theta2]")
        d = theta.size // 2
        t1, t2 = theta[:d], theta[d:]
        if np.any(t2 >= 0):
            raise DomainError("theta2 must be strictly negative")
        var = -0.5 / t2
        return cls(t1 * var, var, variance_frozen)

    @classmethod
    def from_mean_params(cls, eta: ArrayLike, variance_frozen: bool = False) -> DiagGaussian:
        eta = _vec(eta)
        if eta.size % 2:
            raise DimensionError("mean vector must have even length [eta1, eta2]")
        d = eta.size // 2
        e1, e2 = eta[:d], eta[d:]
        return cls(e1, e2 - e1 * e1, variance_frozen)

    def sample(self, n: int, rng: np.random.Generator) -> FloatArray:
        out = rng.standard_normal((n, self.dim))
        out *= self.std
        out += self.mean
        return out

    @classmethod
    def _trusted(cls, mean: FloatArray, variance: FloatArray, variance_frozen: bool) -> DiagGaussian:
        # skips validation; callers pass finite float64 vectors with variance >= floor
        obj = cls.__new__(cls)
        obj.mean, obj.variance, obj.variance_frozen = mean, variance, variance_frozen
        return obj

    def copy(self) -> DiagGaussian:
        return DiagGaussian(self.mean.copy(), self.variance.copy(), self.variance_frozen)


def bregman_divergence(potential: Potential, x: ArrayLike, y: ArrayLike) -> float:
    """``F(x) - F(y) - <x - y, grad F(y)>`` with ``F = potential.psi``.

    For a divergence on mean coordinates pass ``potential.dual()``.

    Raises:
        DimensionError: if ``x`` and ``y`` differ in length from the potential.
        DomainError: if either point is outside the potential's domain.
    """
    x = potential._check(x, natural=True)
    y = potential._check(y, natural=True)
    val = potential.psi(x) - potential.psi(y) - float((x - y) @ potential.grad_psi(y))
    # rounding can produce tiny negatives near x == y
    return max(val, 0.0)


def natural_to_mean(potential: Potential, theta: ArrayLike) -> FloatArray:
    return potential.grad_psi(potential._check(theta, natural=True))


def mean_to_natural(potential: Potential, eta: ArrayLike) -> FloatArray:
    return potential.grad_psi_star(potential._check(eta, natural=False))


def log_likelihood(potential: Potential, theta: ArrayLike, x: ArrayLike) -> float:
    """Per-sample log-likelihood ``<theta, x> - Psi(theta)`` (base measure dropped).

    ``x`` is a sufficient-statistic vector; a mean-parameter vector can be
    passed to score a worker against aggregated moments.
    """
    theta = potential._check(theta, natural=True)
    x = _vec(x)
    if x.shape != theta.shape:
        raise DimensionError(f"theta has length {theta.size} but x has length {x.size}")
    return float(theta @ x) - potential.psi(theta)
