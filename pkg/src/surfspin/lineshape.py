"""Spin-ensemble response and the resonator transmission model.

Sign conventions: the resonator pole is ``i(omega - omega0) - kappa`` with
``kappa = omega0 / Q``.  Every ensemble response ``W`` is dissipative,
``Re W <= 0``, so it adds to the resonator loss rate.

The inhomogeneous (Voigt) response is the Gaussian average of the Lorentzian
response over spin frequencies; with a Gaussian of half width at half maximum
``Delta``::

    W = -Omega**2 * sqrt(pi ln2) / Delta * w((omega - omega_s + i gamma2/2) * sqrt(ln2) / Delta)

which tends to the Lorentzian response as ``Delta -> 0``.
"""

from dataclasses import dataclass, field, replace
import enum
import math

import numpy as np
from scipy.special import ndtr

from .kernels import faddeeva
from .spin_levels import Label, SpinSystem, line_slope

SQRT_LN2 = math.sqrt(math.log(2.0))
SQRT_PI_LN2 = math.sqrt(math.pi * math.log(2.0))


class Shape(str, enum.Enum):
    LORENTZIAN = "lorentzian"
    VOIGT = "voigt"


@dataclass(frozen=True)
class Peak:
    """One spin line of a field sweep.

    ``Omega``, ``gamma2`` and ``Delta`` are angular rates (rad/s).  The line
    crosses the resonator at ``B_peak``; its detuning elsewhere follows the
    local slope of ``line`` in ``spin`` (a g=2 free spin by default).
    """

    label: str
    B_peak: float
    Omega: float
    gamma2: float
    Delta: float = 0.0
    shape: Shape = Shape.LORENTZIAN
    spin: SpinSystem = field(default_factory=SpinSystem.free)
    line: Label = Label.CENTRAL

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        object.__setattr__(self, "line", Label(self.line))
        if self.Omega < 0 or self.gamma2 < 0 or self.Delta < 0:
            raise ValueError("Omega, gamma2 and Delta must be >= 0")
        if self.shape is Shape.LORENTZIAN and self.Delta != 0:
            raise ValueError("a Lorentzian peak has Delta = 0")
        if self.shape is Shape.VOIGT and not self.Delta > 0:
            raise ValueError("a Voigt peak needs Delta > 0")

    def slope(self):
        """d(omega_s)/dB at the peak, rad/s/T."""
        return 2 * math.pi * line_slope(self.spin, self.line, self.B_peak)

    @property
    def T2e(self):
        return 2 * math.pi / self.gamma2 if self.gamma2 > 0 else math.inf


@dataclass(frozen=True)
class Background:
    """Broad spin pedestal: a normal-CDF onset rising to a plateau ``c``."""

    c: float = 0.0
    B_on: float = 0.05
    sigma_on: float = 0.01

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("background amplitude must be >= 0")
        if not self.sigma_on > 0:
            raise ValueError("onset width must be positive")


@dataclass(frozen=True)
class ResonatorParams:
    omega0: float
    Q: float
    Qc: complex = complex(math.inf)

    def __post_init__(self):
        object.__setattr__(self, "Qc", complex(self.Qc))
        if not (self.omega0 > 0 and self.Q > 0):
            raise ValueError("omega0 and Q must be positive")

    @classmethod
    def from_frequency(cls, f0, Q, Qc=complex(math.inf)):
        return cls(2 * math.pi * f0, Q, Qc)

    @property
    def f0(self):
        return self.omega0 / (2 * math.pi)

    @property
    def kappa(self):
        return self.omega0 / self.Q

    @property
    def kappa_c(self):
        return self.omega0 / self.Qc.real

    @property
    def kappa_c_complex(self):
        return self.omega0 / self.Qc


@dataclass(frozen=True)
class SpectrumModel:
    resonator: ResonatorParams
    peaks: tuple = ()
    background: Background = field(default_factory=Background)

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        labels = [p.label for p in self.peaks]
        if len(set(labels)) != len(labels):
            raise ValueError("peak labels must be unique")

    def with_peaks(self, peaks):
        return replace(self, peaks=tuple(peaks))


def lorentzian_response(Omega, gamma2, omega, omega_s):
    return Omega**2 / (1j * (np.asarray(omega) - omega_s) - gamma2 / 2.0)


def voigt_response(Omega, gamma2, Delta, omega, omega_s):
    if Delta <= 1e-7 * gamma2:
        # differs from the Lorentzian by O((Delta/gamma2)^2); avoids overflow
        return lorentzian_response(Omega, gamma2, omega, omega_s)
    z = (np.asarray(omega) - omega_s + 0.5j * gamma2) * (SQRT_LN2 / Delta)
    return -(Omega**2) * SQRT_PI_LN2 / Delta * faddeeva(z)


def ensemble_response(p, omega, omega_s):
    """Complex response ``W`` of peak ``p`` probed at ``omega``."""
    if p.shape is Shape.LORENTZIAN:
        return lorentzian_response(p.Omega, p.gamma2, omega, omega_s)
    return voigt_response(p.Omega, p.gamma2, p.Delta, omega, omega_s)


def background_loss(bg, B):
    return bg.c * ndtr((np.asarray(B, dtype=float) - bg.B_on) / bg.sigma_on)


def spin_frequency(p, omega0, B, slope=None):
    """Linearized spin angular frequency of peak ``p`` at field ``B``."""
    if slope is None:
        slope = p.slope()
    return omega0 + slope * (np.asarray(B, dtype=float) - p.B_peak)


def total_response(model, omega, B, slopes=None):
    omega0 = model.resonator.omega0
    W = np.zeros(np.broadcast(np.asarray(omega), np.asarray(B)).shape, dtype=complex)
    for i, p in enumerate(model.peaks):
        s = None if slopes is None else slopes[i]
        W = W + ensemble_response(p, omega, spin_frequency(p, omega0, B, s))
    return W


def sweep_point(model, B, slopes=None):
    """Field-induced loss ``Qb_inv`` and resonance shift ``df`` (Hz) at ``B``.

    ``df`` is the real part of the shifted pole of the transmission, i.e.
    ``-Im W / 2 pi``: a spin line just below the resonator pushes it up.
    ``B`` may be an array.  ``slopes`` overrides the per-peak field slopes.
    """
    omega0 = model.resonator.omega0
    W = total_response(model, omega0, B, slopes)
    Qb_inv = -W.real / omega0 + background_loss(model.background, B)
    df = -W.imag / (2 * math.pi)
    return Qb_inv, df


def s21(model, omega, B, slopes=None):
    """Notch-type transmission with complex coupling ``Qc``."""
    r = model.resonator
    W = total_response(model, omega, B, slopes)
    # the broad background acts as extra loss rate omega0 * Qb_inv
    extra = -r.omega0 * background_loss(model.background, B)
    den = 1j * (np.asarray(omega) - r.omega0) - r.kappa + W + extra
    return 1.0 + r.kappa_c_complex / den


def s21_bare(f, f0, Q, Qc):
    """Transmission of the bare resonator at frequencies ``f`` (Hz)."""
    f = np.asarray(f, dtype=float)
    w0 = 2 * math.pi * f0
    return 1.0 + (w0 / Qc) / (2j * math.pi * (f - f0) - w0 / Q)
