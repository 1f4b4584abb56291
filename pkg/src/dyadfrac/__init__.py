"""Dyadic fractal covers, quasi-Cantor selection and lacunary wavelet series."""

__version__ = "0.1.0"

from .core import (
    AffineIFS,
    DigitRestricted,
    DyadicInterval,
    ExplicitCover,
    FiniteUnion,
    FractalSpec,
    FullInterval,
    LevelCover,
    build_cover,
    spec_from_dict,
    spec_to_dict,
)
from .dimension import audit_count_bounds, estimate_box_dim
from .duplication import DuplicationParams, audit_card_bounds, classify
from .estimators import (
    BoxDimensionEstimator,
    HolderCertifier,
    LacunaryWaveletSeries,
    QuasiCantorSelector,
    WaveletLeaderSpectrum,
)
from .leaders import (
    audit_prop_BC,
    compute_leaders,
    estimate_holder,
    increasing_spectrum,
    limsup_cover,
)
from .lws import LwsCoefficients, LwsParams, rho_hat, synthesize
from .mdp import build_generations, certify, uniform_tree
from .quasicantor import audit_theorem1, build_ladder, extract_K, prune

__all__ = [
    "AffineIFS",
    "BoxDimensionEstimator",
    "DigitRestricted",
    "DyadicInterval",
    "DuplicationParams",
    "ExplicitCover",
    "FiniteUnion",
    "FractalSpec",
    "FullInterval",
    "HolderCertifier",
    "LacunaryWaveletSeries",
    "LevelCover",
    "LwsCoefficients",
    "LwsParams",
    "QuasiCantorSelector",
    "WaveletLeaderSpectrum",
    "audit_card_bounds",
    "audit_count_bounds",
    "audit_prop_BC",
    "audit_theorem1",
    "build_cover",
    "build_generations",
    "build_ladder",
    "certify",
    "classify",
    "compute_leaders",
    "estimate_box_dim",
    "estimate_holder",
    "extract_K",
    "increasing_spectrum",
    "limsup_cover",
    "prune",
    "rho_hat",
    "spec_from_dict",
    "spec_to_dict",
    "synthesize",
    "uniform_tree",
]
