"""Statistical self-checks for the trust-region samplers.

Used by the ``sampler-check`` CLI command and by the test suite. Each check
returns a :class:`CheckResult`; nothing here raises on a failed check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .expfam import DiagGaussianPotential, FixedVarianceGaussian
from .rng import make_rng
from .trust_region import (
    TrustRegion,
    boundary_radius,
    diag_box_sample,
    exact_sample,
    in_box,
    in_proxy_ellipsoid,
    proxy_radius,
    proxy_sample,
    uniform_sphere_direction,
)

ALPHA = 0.01


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def quadratic_region(dim: int = 2, delta: float = 0.5, seed: int = 0) -> TrustRegion:
    rng = make_rng(seed)
    pot = FixedVarianceGaussian(rng.uniform(0.3, 3.0, dim))
    return TrustRegion(rng.normal(size=dim), delta, pot)


def curved_region(delta: float = 0.5) -> TrustRegion:
    """Full diagonal-Gaussian geometry around ``mu = 0.5, s2 = 1``."""
    pot = DiagGaussianPotential(1)
    return TrustRegion(np.array([0.5, 1.25]), delta, pot)


def exact_feasibility(tr: TrustRegion, n: int, seed: int = 1) -> CheckResult:
    rng = make_rng(seed)
    worst = 0.0
    bad = 0
    for _ in range(n):
        eta = exact_sample(tr, rng)
        if not tr.contains(eta):
            bad += 1
        else:
            worst = max(worst, tr.divergence(eta))
    name = f"exact sampler feasibility ({type(tr.potential).__name__}, d={tr.dim}, n={n})"
    return CheckResult(name, bad == 0, f"{bad} violations, max D/delta = {worst / tr.radius:.12f}")


def exact_uniformity(tr: TrustRegion, n: int, seed: int = 2) -> list[CheckResult]:
    """KS on the radial law ``r ** d`` and chi-square on orthant counts.

    Valid for quadratic potentials, where ``sqrt(D / delta)`` is the radius
    normalised by the boundary along the same direction.
    """
    rng = make_rng(seed)
    d = tr.dim
    pts = np.stack([exact_sample(tr, rng) for _ in range(n)])
    r = np.sqrt([tr.divergence(p) / tr.radius for p in pts])
    ks = stats.kstest(r, lambda x: np.clip(x, 0, 1) ** d)
    signs = (pts - tr.center_eta > 0).astype(int)
    cells = signs @ (1 << np.arange(d))
    counts = np.bincount(cells, minlength=2**d)
    chi = stats.chisquare(counts)
    return [
        CheckResult(f"exact sampler radial law r^{d} (KS, n={n})", ks.pvalue > ALPHA, f"p = {ks.pvalue:.4f}"),
        CheckResult(f"exact sampler orthant balance (chi2, n={n})", chi.pvalue > ALPHA, f"p = {chi.pvalue:.4f}"),
    ]


def proxy_exact_agreement_quadratic(tr: TrustRegion, n_dirs: int = 1000, seed: int = 3) -> CheckResult:
    rng = make_rng(seed)
    h = tr.hessian()
    worst = 0.0
    for _ in range(n_dirs):
        v = uniform_sphere_direction(tr.dim, rng)
        worst = max(worst, abs(proxy_radius(h, v, tr.radius) - boundary_radius(tr, v)))
    return CheckResult(
        f"proxy radius == exact radius for quadratic potential ({n_dirs} directions)",
        worst < 1e-9,
        f"max |diff| = {worst:.3e}",
    )


def proxy_ratio_curved(deltas=(1e-2, 1e-4, 1e-6), n_dirs: int = 200, seed: int = 4) -> list[CheckResult]:
    """``proxy / exact`` radius ratio on the curved geometry as delta shrinks."""
    out = []
    prev_dev = np.inf
    for delta in deltas:
        tr = curved_region(delta)
        rng = make_rng(seed)
        h = tr.hessian()
        ratios = []
        for _ in range(n_dirs):
            v = uniform_sphere_direction(tr.dim, rng)
            ratios.append(proxy_radius(h, v, delta) / boundary_radius(tr, v))
        dev = float(np.max(np.abs(np.asarray(ratios) - 1.0)))
        ok = dev <= prev_dev and (delta > 1e-4 or dev < 0.05)
        out.append(CheckResult(f"proxy/exact radius ratio, curved potential, delta={delta:g}", ok, f"max |ratio - 1| = {dev:.3e}"))
        prev_dev = dev
    return out


def proxy_feasibility(tr: TrustRegion, n: int, seed: int = 5) -> CheckResult:
    rng = make_rng(seed)
    h = tr.hessian()
    bad = sum(not in_proxy_ellipsoid(tr.center_eta, h, tr.radius, proxy_sample(tr, h, rng)) for _ in range(n))
    return CheckResult(f"proxy sampler ellipsoid membership (n={n})", bad == 0, f"{bad} violations")


def box_feasibility(tr: TrustRegion, n: int, seed: int = 6) -> CheckResult:
    rng = make_rng(seed)
    s2 = 1.0 / tr.hessian()
    bad = sum(not in_box(tr.center_eta, tr.radius, s2, diag_box_sample(tr.center_eta, tr.radius, s2, rng)) for _ in range(n))
    return CheckResult(f"box sampler membership (n={n})", bad == 0, f"{bad} violations")


def sphere_dim1_balance(n: int = 10_000, seed: int = 7) -> CheckResult:
    rng = make_rng(seed)
    v = np.array([uniform_sphere_direction(1, rng)[0] for _ in range(n)])
    counts = np.array([(v < 0).sum(), (v > 0).sum()])
    chi = stats.chisquare(counts)
    return CheckResult("sphere direction d=1 sign balance (chi2)", chi.pvalue > ALPHA, f"p = {chi.pvalue:.4f}")


def run_all(n: int = 10_000) -> list[CheckResult]:
    quad = quadratic_region(2)
    quad3 = quadratic_region(3, seed=11)
    results = [exact_feasibility(quad, n), exact_feasibility(curved_region(), n)]
    results += exact_uniformity(quad, n)
    results += exact_uniformity(quad3, n)
    results.append(proxy_exact_agreement_quadratic(quad))
    results += proxy_ratio_curved()
    results.append(proxy_feasibility(quad, n))
    results.append(box_feasibility(quad, n))
    results.append(sphere_dim1_balance())
    return results
