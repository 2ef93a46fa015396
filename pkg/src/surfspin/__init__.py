"""Modelling and fitting of resonator-detected surface spin resonance."""

__version__ = "0.1.0"

from .constants import CODATA, PhysicalConstants
from .errors import DomainError, FitError, InputError, NumericError, SingularityError
from .spin_levels import (Label, SpinKind, SpinSystem, apparent_g, eigensystem,
                          peak_area_factor, resonance_fields, transitions)
from .lineshape import (Background, Peak, ResonatorParams, Shape, SpectrumModel,
                        ensemble_response, s21, sweep_point)
from .kernels import faddeeva
from .geometry import REFERENCE_GEOMETRY, StripGeometry, alpha, field_integral, spin_density
from .datasets import (AngleSeries, PeakPositions, S21Trace, SaturationCurve, SweepTrace,
                       TemperatureSeries)
from .synth import Scenario, synthesize
