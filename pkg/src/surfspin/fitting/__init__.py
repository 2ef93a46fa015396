"""Estimators built on a common Levenberg-Marquardt engine."""

from .lm import FitResult, lm_fit, bootstrap_ci, transform_result
from .resonance import fit_resonance
from .sweep import fit_sweep, decompose
from .levels import fit_peak_positions, g2_offsets
from .thermal import fit_temperature, abundance_from_areas
from .saturation import fit_saturation, derive_t1, t2e_from_linewidth
from .angle import fit_angle

__all__ = [
    "FitResult", "lm_fit", "bootstrap_ci", "transform_result",
    "fit_resonance", "fit_sweep", "decompose", "fit_peak_positions", "g2_offsets",
    "fit_temperature", "abundance_from_areas", "fit_saturation", "derive_t1",
    "t2e_from_linewidth", "fit_angle",
]
