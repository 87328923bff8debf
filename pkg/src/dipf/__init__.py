"""Infrared and visible image fusion with dehazing-inspired layer separation."""

from ._validation import StageError
from .decompose import SanfParams, band_decompose, preprocess_infrared, sanf, split_contrast_structure
from .degrade import DegradeSpec, apply_spec
from .estimator import DIPFusion
from .fusion import FusionConfig, FusionResult, fuse_pipeline
from .io import read_image, write_image
from .metrics import QualityReport, evaluate, q_g, q_m, q_mi, q_ncie
from .transmission import DEFAULT_BETA, BetaParam, RegularizerConfig, coarse_transmission, fit_beta, refine_transmission

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BETA",
    "BetaParam",
    "DIPFusion",
    "DegradeSpec",
    "FusionConfig",
    "FusionResult",
    "QualityReport",
    "RegularizerConfig",
    "SanfParams",
    "StageError",
    "apply_spec",
    "band_decompose",
    "coarse_transmission",
    "evaluate",
    "fit_beta",
    "fuse_pipeline",
    "preprocess_infrared",
    "q_g",
    "q_m",
    "q_mi",
    "q_ncie",
    "read_image",
    "refine_transmission",
    "sanf",
    "split_contrast_structure",
    "write_image",
]
