"""Sampling from a Bregman ball around the centroid.

The ball ``{theta : D_Psi(theta || theta_c) <= delta}`` is handled through its
dual description in mean coordinates, ``{eta : D_Psi*(eta_c || eta) <= delta}``.

Three samplers:

* :func:`exact_sample` -- direction on the sphere, root-solved boundary radius,
  ``u ** (1/d)`` radial law. Uniform on the dual ball.
* :func:`proxy_sample` -- quadratic (Hessian) approximation with a closed-form
  boundary radius. Draws the signed radius uniformly on ``[-r, r]``, i.e. a line
  law rather than a volume law; it is *not* volume-uniform in the ellipsoid.
* :func:`diag_box_sample` -- fixed-variance diagonal Gaussian shortcut with
  independent uniform draws per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .expfam import (
    DomainError,
    FixedVarianceGaussian,
    FloatArray,
    Potential,
    bregman_divergence,
)
from .rng import RngStream

MAX_ITER = 200
PROXY_DIM_THRESHOLD = 100


class RayExitError(DomainError):
    """The ray ``eta_c + rho v`` left the conjugate domain."""

    def __init__(self, msg: str, rho: float, last_feasible: float | None = None):
        super().__init__(msg)
        self.rho = rho
        self.last_feasible = last_feasible


class RootBracketError(RuntimeError):
    """The boundary radius could not be bracketed."""


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass
class TrustRegion:
    center_eta: FloatArray
    radius: float
    potential: Potential
    _psi_c: float = field(init=False, repr=False)

    def __post_init__(self):
        self.center_eta = np.atleast_1d(np.asarray(self.center_eta, dtype=np.float64))
        if not self.radius > 0:
            raise ValueError(f"trust radius must be positive, got {self.radius}")
        if self.center_eta.shape != (self.potential.dim,):
            raise ValueError("center dimension does not match the potential")
        if not self.potential.in_mean_domain(self.center_eta):
            raise DomainError("trust-region center outside the mean domain")
        self._psi_c = self.potential.psi_star(self.center_eta)

    @property
    def dim(self) -> int:
        return self.center_eta.size

    def divergence(self, eta: ArrayLike) -> float:
        """``D_Psi*(center || eta)``."""
        return bregman_divergence(self.potential.dual(), self.center_eta, eta)

    def contains(self, eta: ArrayLike, tol: float = 0.0) -> bool:
        try:
            return self.divergence(eta) <= self.radius + tol
        except DomainError:
            return False

    def hessian(self) -> FloatArray:
        return self.potential.hess_psi_star(self.center_eta)


def uniform_sphere_direction(dim: int, rng: RngStream) -> FloatArray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    while True:
        v = rng.standard_normal(dim)
        n = np.linalg.norm(v)
        if n > 0:
            return v / n


def radial_divergence(tr: TrustRegion, v: ArrayLike, rho: float) -> float:
    """``g_v(rho) = D_Psi*(eta_c || eta_c + rho v)``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return 0.0
    pot = tr.potential
    step = rho * np.asarray(v, dtype=np.float64)
    eta = tr.center_eta + step
    if not pot.in_mean_domain(eta):
        raise RayExitError(f"ray leaves the conjugate domain at rho={rho:g}", rho)
    # D_Psi*(c || c + step) = Psi*(c) - Psi*(eta) + <step, grad Psi*(eta)>
    return max(tr._psi_c - pot.psi_star(eta) + float(step @ pot.grad_psi_star(eta)), 0.0)


def _initial_radius(tr: TrustRegion) -> float:
    h = tr.hessian()
    scale = float(np.mean(h)) if h.ndim == 1 else float(np.trace(h)) / h.shape[0]
    if not scale > 0 or not np.isfinite(scale):
        scale = 1.0
    return float(np.sqrt(2.0 * tr.radius / scale))


def boundary_radius(tr: TrustRegion, v: ArrayLike) -> float:
    """Root of ``g_v(rho) = delta`` along ``v``.

    Brackets by doubling from ``sqrt(2 delta / mean curvature)`` and then runs an
    Illinois false-position iteration with a bisection safeguard, stopping once
    ``delta - tol <= g <= delta`` with ``tol = 1e-10 * max(1, delta)``. The
    returned radius always satisfies ``g_v(rho) <= delta``. If the ray leaves the
    conjugate domain before reaching ``delta`` the largest feasible radius found
    is returned instead (the ball is truncated by the domain).
    """
    delta = tr.radius
    tol = 1e-10 * max(1.0, delta)

    def f(rho):
        return radial_divergence(tr, v, rho) - delta

    lo, f_lo = 0.0, -delta
    hi = _initial_radius(tr)
    f_hi = None
    for _ in range(MAX_ITER):
        try:
            f_hi = f(hi)
        except RayExitError:
            # bisect towards the domain boundary, keeping lo feasible
            bad = hi
            f_hi = None
            for _ in range(60):
                mid = 0.5 * (lo + bad)
                try:
                    fm = f(mid)
                except RayExitError:
                    bad = mid
                    continue
                if fm >= 0:
                    hi, f_hi = mid, fm
                    break
                lo, f_lo = mid, fm
            if f_hi is None:
                return lo
            break
        if f_hi >= 0:
            break
        lo, f_lo = hi, f_hi
        hi *= 2.0
    else:
        raise RootBracketError(f"no bracket for delta={delta:g} after {MAX_ITER} doublings")

    if -tol <= f_hi <= 0:
        return hi
    # Illinois: wa/wb are the (possibly halved) end values used for interpolation
    wa, wb = f_lo, f_hi
    side = 0
    for _ in range(MAX_ITER):
        if f_lo >= -tol:
            return lo
        x = (lo * wb - hi * wa) / (wb - wa)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx > 0:
            hi, f_hi, wb = x, fx, fx
            if side == 1:
                wa *= 0.5
            side = 1
        else:
            lo, f_lo, wa = x, fx, fx
            if side == -1:
                wb *= 0.5
            side = -1
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return lo


def exact_sample(tr: TrustRegion, rng: RngStream) -> FloatArray:
    v = uniform_sphere_direction(tr.dim, rng)
    rho_max = boundary_radius(tr, v)
    u = rng.random()
    return tr.center_eta + u ** (1.0 / tr.dim) * rho_max * v


def _check_pd(hessian: ArrayLike) -> FloatArray:
    h = np.asarray(hessian, dtype=np.float64)
    if h.ndim == 1:
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise NotPositiveDefiniteError("diagonal Hessian must be strictly positive")
        return h
    if h.ndim != 2 or h.shape[0] != h.shape[1] or not np.allclose(h, h.T):
        raise NotPositiveDefiniteError("Hessian must be a symmetric square matrix")
    try:
        np.linalg.cholesky(h)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("Hessian is not positive definite") from exc
    return h


def _quad(h: FloatArray, v: FloatArray) -> float:
    return float(v @ (h * v)) if h.ndim == 1 else float(v @ h @ v)


def proxy_radius(hessian: ArrayLike, v: ArrayLike, delta: float) -> float:
    """Closed-form ``sqrt(2 delta / (v' H v))``."""
    h = _check_pd(hessian)
    return float(np.sqrt(2.0 * delta / _quad(h, np.asarray(v, dtype=np.float64))))


def proxy_sample(tr: TrustRegion, hessian: ArrayLike, rng: RngStream) -> FloatArray:
    h = _check_pd(hessian)
    v = uniform_sphere_direction(tr.dim, rng)
    r = float(np.sqrt(2.0 * tr.radius / _quad(h, v)))
    t = rng.uniform(-r, r)
    return tr.center_eta + t * v


def in_proxy_ellipsoid(center: ArrayLike, hessian: ArrayLike, delta: float, eta: ArrayLike, tol: float = 1e-12) -> bool:
    d = np.asarray(eta, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    return _quad(np.asarray(hessian, dtype=np.float64), d) <= 2.0 * delta * (1 + tol)


def diag_box_sample(center_eta: ArrayLike, delta: float, sigma2: ArrayLike, rng: RngStream) -> FloatArray:
    """``eta_i ~ U[c_i - sqrt(2 delta s2_i), c_i + sqrt(2 delta s2_i)]`` independently."""
    c = np.array(center_eta, dtype=np.float64, ndmin=1)
    s2 = np.asarray(sigma2, dtype=np.float64)
    if s2.shape != c.shape:
        s2 = np.broadcast_to(s2, c.shape)
    if not (s2.min() > 0 and s2.max() < np.inf):
        raise ValueError("variances must be positive and finite")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    half = np.sqrt(2.0 * delta * s2)
    return c + rng.uniform(-1.0, 1.0, c.size) * half


def in_box(center: ArrayLike, delta: float, sigma2: ArrayLike, eta: ArrayLike) -> bool:
    half = np.sqrt(2.0 * delta * np.asarray(sigma2, dtype=np.float64))
    return bool(np.all(np.abs(np.asarray(eta) - np.asarray(center)) <= half * (1 + 1e-12)))


def choose_sampler(tr: TrustRegion, method: str = "auto") -> str:
    """Resolve ``"auto"``: box for fixed-variance Gaussians, proxy above 100 dims, else exact."""
    if method != "auto":
        if method not in ("exact", "proxy", "box"):
            raise ValueError(f"unknown sampler {method!r}")
        return method
    if isinstance(tr.potential, FixedVarianceGaussian):
        return "box"
    if tr.dim > PROXY_DIM_THRESHOLD:
        return "proxy"
    return "exact"


def sample_trust_region(tr: TrustRegion, rng: RngStream, method: str = "auto") -> FloatArray:
    method = choose_sampler(tr, method)
    if method == "box":
        if not isinstance(tr.potential, FixedVarianceGaussian):
            raise ValueError("box sampler needs a fixed-variance Gaussian potential")
        return diag_box_sample(tr.center_eta, tr.radius, 1.0 / tr.hessian(), rng)
    if method == "proxy":
        return proxy_sample(tr, tr.hessian(), rng)
    return exact_sample(tr, rng)
