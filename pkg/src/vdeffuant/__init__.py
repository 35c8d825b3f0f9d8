"""Simulation and exact analysis of the one-dimensional vectorial Deffuant model."""
__version__ = "0.1.0"

from .opinions import (Boundary, Dynamics, InitKind, InitSpec, LatticeSpec, ModelParams,  # noqa: E402
                       hamming, sample_configuration)
from .engine import ActiveArrowLog, ArrowEvent, CouplingError, Engine, Stop, StopReason, rate  # noqa: E402
from .particles import ContributionLedger, EdgeClass, ParticleView, classify, derive  # noqa: E402
from .genealogy import ancestor, ancestors  # noqa: E402
from .analytics import (FoldVariant, PhaseRegion, biased_poly, expected_weight_biased,  # noqa: E402
                        expected_weight_uniform, folded_bound, phase_region, threshold_one_margin,
                        weight_law)

__all__ = [
    "ActiveArrowLog", "ArrowEvent", "Boundary", "ContributionLedger", "CouplingError", "Dynamics",
    "EdgeClass", "Engine", "FoldVariant", "InitKind", "InitSpec", "LatticeSpec", "ModelParams",
    "ParticleView", "PhaseRegion", "Stop", "StopReason", "ancestor", "ancestors", "biased_poly",
    "classify", "derive", "expected_weight_biased", "expected_weight_uniform", "folded_bound",
    "hamming", "phase_region", "rate", "sample_configuration", "threshold_one_margin", "weight_law",
]
