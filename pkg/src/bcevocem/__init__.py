"""Ensemble cross-entropy method guided by a weighted Bregman centroid.

Modules:

* ``expfam``: exponential-family potentials, Bregman divergences, diagonal Gaussians.
* ``centroid``: performance weights, weighted centroid, information radius, scores.
* ``trust_region``: samplers for the region ``D(eta_c || eta) <= delta``.
* ``cem``: CEM updates and the vanilla, decentralized and guided ensembles.
* ``mpc``: receding-horizon control on a known simulator.
* ``bench``: benchmark objectives, metrics CSV, SVG plots and the CLI.
"""

from __future__ import annotations

from .cem import CemConfig, CemError, EnsembleState, Objective, bc_evocem_run, cem_iterate, decentralized_run, vanilla_run
from .centroid import (
    Centroid,
    WorkerState,
    information_radius,
    performance_weights,
    relevance_scores,
    weighted_centroid,
)
from .expfam import DiagGaussian, DiagGaussianPotential, FixedVarianceGaussian, SquaredNorm, bregman_divergence
from .mpc import EpisodeRecord, mpc_config, mpc_episode, point_mass_env
from .rng import derive_rng, make_rng
from .trust_region import TrustRegion, sample_trust_region

__version__ = "0.1.0"

__all__ = [
    "CemConfig",
    "CemError",
    "Centroid",
    "DiagGaussian",
    "DiagGaussianPotential",
    "EnsembleState",
    "EpisodeRecord",
    "FixedVarianceGaussian",
    "Objective",
    "SquaredNorm",
    "TrustRegion",
    "WorkerState",
    "bc_evocem_run",
    "bregman_divergence",
    "cem_iterate",
    "decentralized_run",
    "derive_rng",
    "information_radius",
    "make_rng",
    "mpc_config",
    "mpc_episode",
    "performance_weights",
    "point_mass_env",
    "relevance_scores",
    "sample_trust_region",
    "vanilla_run",
    "weighted_centroid",
]
