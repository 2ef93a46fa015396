"""Measured or synthetic datasets, validated on construction."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def _arr(x, name, n=None):
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if n is not None and len(a) != n:
        raise InputError(f"{name} has {len(a)} rows, expected {n}")
    if not np.all(np.isfinite(a)):
        bad = int(np.flatnonzero(~np.isfinite(a))[0])
        raise InputError(f"{name} row {bad} is not finite")
    return a


def _strictly_monotone(a, name):
    d = np.diff(a)
    if len(a) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        sign = 1 if d[0] > 0 else -1
        bad = int(np.flatnonzero(sign * d <= 0)[0]) + 1
        raise InputError(f"{name} is not strictly monotone at row {bad}")


@dataclass(frozen=True)
class SweepTrace:
    """Resonator frequency and loss versus static field."""

    B: np.ndarray
    f0: np.ndarray
    Q_inv: np.ndarray
    B_ref: float = None

    def __post_init__(self):
        B = _arr(self.B, "B")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "f0", _arr(self.f0, "f0", len(B)))
        object.__setattr__(self, "Q_inv", _arr(self.Q_inv, "Q_inv", len(B)))
        _strictly_monotone(B, "B")
        if self.B_ref is None:
            object.__setattr__(self, "B_ref", float(B[np.argmin(np.abs(B))]))

    @property
    def ref_index(self):
        return int(np.argmin(np.abs(self.B - self.B_ref)))

    @property
    def Qb_inv(self):
        return self.Q_inv - self.Q_inv[self.ref_index]

    @property
    def df(self):
        return self.f0 - self.f0[self.ref_index]

    def __len__(self):
        return len(self.B)


@dataclass(frozen=True)
class S21Trace:
    f: np.ndarray
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        f = _arr(self.f, "f")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "re", _arr(self.re, "s21_re", len(f)))
        object.__setattr__(self, "im", _arr(self.im, "s21_im", len(f)))
        _strictly_monotone(f, "f")

    @classmethod
    def from_complex(cls, f, z):
        z = np.asarray(z, dtype=complex)
        return cls(f, z.real, z.imag)

    @property
    def s21(self):
        return self.re + 1j * self.im


@dataclass(frozen=True)
class SaturationCurve:
    P_drive: np.ndarray
    Qs_inv: np.ndarray
    Q: float
    Q_ext: float

    def __post_init__(self):
        P = _arr(self.P_drive, "P_drive")
        object.__setattr__(self, "P_drive", P)
        object.__setattr__(self, "Qs_inv", _arr(self.Qs_inv, "Qs_inv", len(P)))
        if np.any(P <= 0):
            raise InputError("drive powers must be positive")
        if np.any(np.diff(P) <= 0):
            raise InputError("drive powers must be strictly ascending")
        if not (self.Q > 0 and self.Q_ext > 0):
            raise InputError("Q and Q_ext must be positive")

    @property
    def P0(self):
        """Circulating power ``2 Q^2 P_drive / Q_ext``."""
        return 2.0 * self.Q**2 * self.P_drive / self.Q_ext


@dataclass(frozen=True)
class TemperatureSeries:
    T: np.ndarray
    areas: dict
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        T = _arr(self.T, "T")
        if np.any(T <= 0):
            bad = int(np.flatnonzero(T <= 0)[0])
            raise InputError(f"temperature row {bad} is not positive")
        if np.any(np.diff(T) <= 0):
            raise InputError("temperatures must be strictly ascending")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "areas", {k: _arr(v, k, len(T)) for k, v in self.areas.items()})
        object.__setattr__(self, "errors", {k: _arr(v, k, len(T)) for k, v in self.errors.items()})
        for k, v in self.areas.items():
            if np.any(v < 0):
                raise InputError(f"area column {k} has negative entries")


@dataclass(frozen=True)
class AngleSeries:
    theta_deg: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        th = _arr(self.theta_deg, "theta")
        if np.any((th < 0) | (th > 90)):
            raise InputError("angles must lie in [0, 90] degrees")
        object.__setattr__(self, "theta_deg", th)
        object.__setattr__(self, "g", _arr(self.g, "g", len(th)))


@dataclass(frozen=True)
class PeakPositions:
    f_res: np.ndarray
    B_peak: np.ndarray
    labels: tuple

    def __post_init__(self):
        f = _arr(self.f_res, "f_res")
        object.__setattr__(self, "f_res", f)
        object.__setattr__(self, "B_peak", _arr(self.B_peak, "B_peak", len(f)))
        object.__setattr__(self, "labels", tuple(str(l).lower() for l in self.labels))
        if len(self.labels) != len(f):
            raise InputError("one label per row is required")
        if np.any(f <= 0) or np.any(self.B_peak <= 0):
            raise InputError("frequencies and fields must be positive")
