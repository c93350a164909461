"""Simulation and analysis toolkit for rephased amplified spontaneous emission (RASE).

Quadratures are normalised so that the vacuum has unit variance throughout.
"""

from rasesim.gaussian import (
    GaussianState,
    LossChannel,
    SqueezeParams,
    apply_loss,
    quadrature_stats,
    rotate,
    symplectic_eigenvalues,
    two_mode_squeeze,
    vacuum,
)
from rasesim.model import (
    DecayScaling,
    GainFeature,
    InsepPoint,
    ase_variance,
    find_min_b,
    insep_curve,
    lossy_tmsv_state,
    rase_efficiency,
    scale_efficiency,
)

__version__ = "0.1.0"

__all__ = [
    "DecayScaling",
    "GainFeature",
    "GaussianState",
    "InsepPoint",
    "LossChannel",
    "SqueezeParams",
    "apply_loss",
    "ase_variance",
    "find_min_b",
    "insep_curve",
    "lossy_tmsv_state",
    "quadrature_stats",
    "rase_efficiency",
    "rotate",
    "scale_efficiency",
    "symplectic_eigenvalues",
    "two_mode_squeeze",
    "vacuum",
]
