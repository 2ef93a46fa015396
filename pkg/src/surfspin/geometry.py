"""Two-strip coplanar geometry: single-photon field, power-to-field conversion
and surface spin density.

The cross-section is two superconducting strips of width ``w`` whose inner
edges sit at ``x = +-b``; the outer edges are at ``+-S`` with ``S = b + w``.
The field profile is the conformal-mapping solution for antiparallel strip
currents, evaluated in the plane ``y = 0``::

    H(z) = -I0 / (2 S K(k')) * S**2 / sqrt((z**2 - b**2)(z**2 - S**2)),   k' = sqrt(1 - b**2/S**2)

Functions here return flux density ``mu0 * H`` in tesla.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy import integrate

from . import constants as C
from .errors import DomainError, NumericError, SingularityError
from .kernels import strip_inverse_product_sum

DEFAULT_CUTOFF = 140e-9


@dataclass(frozen=True)
class StripGeometry:
    b: float
    w: float
    L_res: float
    delta_cut: float = DEFAULT_CUTOFF
    Z: float = 50.0

    def __post_init__(self):
        if not (self.b > 0 and self.w > 0):
            raise DomainError("half-gap b and width w must be positive")
        if not 0 < self.delta_cut < self.w:
            raise DomainError("cutoff must lie in (0, w)")
        if not 2 * self.delta_cut < self.b:
            raise DomainError("cutoff must be smaller than half the half-gap")
        if not (self.Z > 0 and self.L_res > 0):
            raise DomainError("Z and L_res must be positive")

    @property
    def S(self):
        return self.b + self.w

    def scaled(self, lam):
        """Geometry with every transverse length multiplied by ``lam``."""
        return replace(self, b=self.b * lam, w=self.w * lam, delta_cut=self.delta_cut * lam)


@dataclass(frozen=True)
class DensityResult:
    n: float
    n_central: float
    n_satLow: float
    n_satHigh: float

    @property
    def n_H(self):
        return self.n_satLow + self.n_satHigh

    @property
    def ratio_H_e(self):
        return self.n_H / self.n_central if self.n_central > 0 else math.inf


def elliptic_k(k):
    """Complete elliptic integral of the first kind, modulus convention.

    ``K(k) = pi / (2 AGM(1, sqrt(1 - k**2)))``.
    """
    if not (0 <= k < 1):
        raise DomainError("elliptic modulus must lie in [0, 1)")
    a, g = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    for _ in range(64):
        if abs(a - g) <= 1e-16 * a:
            break
        a, g = 0.5 * (a + g), math.sqrt(a * g)
    return math.pi / (2.0 * a)


def single_photon_current(omega, Z):
    """RMS current of one photon in a resonator of impedance ``Z``."""
    if not (omega > 0 and Z > 0):
        raise DomainError("omega and Z must be positive")
    return math.sqrt(2.0 * C.hbar * omega**2 / Z)


def _modulus(g):
    return math.sqrt(1.0 - (g.b / g.S) ** 2)


def _field_prefactor(g, omega):
    """mu0 * I0 * S / (2 K), so that |B(x,0)| = pref / sqrt|(x^2-b^2)(x^2-S^2)|."""
    return C.mu_0 * single_photon_current(omega, g.Z) * g.S / (2.0 * elliptic_k(_modulus(g)))


def strip_field(g, omega, x, y=0.0):
    """Complex flux density (tesla) of a single-photon excitation at ``x + i y``."""
    z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
    prod = (z * z - g.b**2) * (z * z - g.S**2)
    if np.any(prod == 0):
        raise SingularityError("field evaluated at a strip edge")
    I0 = single_photon_current(omega, g.Z)
    K = elliptic_k(_modulus(g))
    return -C.mu_0 * I0 / (2 * g.S * K) * g.S**2 / np.sqrt(prod)


def _inverse_product(x, b, S):
    x2 = x * x
    return 1.0 / abs((x2 - b * b) * (x2 - S * S))


def _edge_piece(f, edge, start, stop, delta):
    """Integral of f over the part of [start, stop] at distance >= delta from
    ``edge`` (one side), using x = edge +- delta * exp(t)."""
    sgn = 1.0 if stop > edge else -1.0
    far = abs(stop - edge)
    if far <= delta:
        return 0.0, 0.0
    tmax = math.log(far / delta)
    val, err = integrate.quad(lambda t: f(edge + sgn * delta * math.exp(t)) * delta * math.exp(t),
                              0.0, tmax, epsabs=0.0, epsrel=1e-11, limit=200)
    return val, err


def inverse_product_integral(b, S, delta):
    """Integral over the real line of ``1/|(x^2-b^2)(x^2-S^2)|`` with
    ``delta``-neighbourhoods of the four edges removed (adaptive quadrature)."""
    f = lambda x: _inverse_product(x, b, S)
    mid_gap = 0.5 * (b + S)
    pieces = [
        _edge_piece(f, b, b, 0.0, delta),          # [0, b - delta]
        _edge_piece(f, b, b, mid_gap, delta),      # [b + delta, mid]
        _edge_piece(f, S, S, mid_gap, delta),      # [mid, S - delta]
        _edge_piece(f, S, S, 2.0 * S, delta),      # [S + delta, 2S]
    ]
    tail, tail_err = integrate.quad(lambda v: f(2.0 * S / v) * 2.0 * S / (v * v), 0.0, 1.0,
                                    epsabs=0.0, epsrel=1e-11, limit=200)
    pieces.append((tail, tail_err))
    val = 2.0 * sum(p[0] for p in pieces)
    err = 2.0 * sum(p[1] for p in pieces)
    if not math.isfinite(val) or err > 1e-6 * abs(val):
        raise NumericError(f"edge-field quadrature did not converge: value={val!r} error={err!r}")
    return val


def inverse_product_integral_closed(b, S, delta):
    """Same integral from the partial-fraction antiderivative (logarithms)."""
    def G(x):
        # antiderivative of 1/((x^2-b^2)(x^2-S^2)) via
        # (1/(x^2-S^2) - 1/(x^2-b^2)) / (S^2-b^2)
        return (_log_ratio(x, S) - _log_ratio(x, b)) / (S * S - b * b)

    def _log_ratio(x, a):
        return math.log(abs((x - a) / (x + a))) / (2 * a)

    # the product is positive on [0, b) and (S, inf), negative on (b, S)
    inner = G(b - delta) - G(0.0)
    gap = -(G(S - delta) - G(b + delta))
    outer = -G(S + delta)
    return 2.0 * (inner + gap + outer)


def field_integral(g, omega):
    """Integral of ``|B(x, 0)|**2`` over the line, edges cut at ``delta_cut``; T^2 m."""
    pref = _field_prefactor(g, omega)
    return pref**2 * inverse_product_integral(g.b, g.S, g.delta_cut)


def field_integral_riemann(g, omega, n=10_000_000, x_max=None):
    """Brute-force midpoint sum of the same integral on a uniform grid.

    Uses the hot kernel; the grid spacing is common to all pieces and the
    part beyond ``x_max`` (default 300 S) is added from the 1/x^4 tail.
    """
    b, S, d = g.b, g.S, g.delta_cut
    x_max = 300.0 * S if x_max is None else x_max
    spans = [(0.0, b - d), (b + d, S - d), (S + d, x_max)]
    total_len = sum(hi - lo for lo, hi in spans)
    J = 0.0
    for lo, hi in spans:
        m = max(1, int(round(n * (hi - lo) / total_len)))
        J += strip_inverse_product_sum(lo, hi, m, b, S)
    J += 1.0 / (3.0 * x_max**3)
    return _field_prefactor(g, omega) ** 2 * 2.0 * J


def alpha(g):
    """Microwave-field-per-root-power conversion factor, T/sqrt(W).

    Averages the edge profile over ``[S, S + w]``; the 1/sqrt singularity at
    ``x = S`` is removed with ``x = S + u**2``.
    """
    b, S, w = g.b, g.S, g.w
    K = elliptic_k(_modulus(g))
    pref = C.mu_0 / (2.0 * math.sqrt(2.0 * g.Z) * S * K)
    integrand = lambda u: 2.0 * S * S / math.sqrt(((S + u * u) ** 2 - b * b) * (2.0 * S + u * u))
    val, err = integrate.quad(integrand, 0.0, math.sqrt(w), epsabs=0.0, epsrel=1e-12, limit=200)
    if err > 1e-8 * val:
        raise NumericError(f"alpha quadrature did not converge: value={val!r} error={err!r}")
    return pref * val / w


def polarization(omega0, T):
    """Thermal spin polarization magnitude ``tanh(hbar omega0 / 2 k_B T)``."""
    if not T > 0:
        raise DomainError("temperature must be positive")
    return math.tanh(C.hbar * omega0 / (2.0 * C.k_B * T))


def spin_density(Omega, T, g, omega0):
    """Surface spin density (m^-2) from a collective coupling ``Omega`` (rad/s)."""
    if not (Omega >= 0 and omega0 > 0):
        raise DomainError("Omega must be >= 0 and omega0 positive")
    beta = polarization(omega0, T)
    num = 8.0 * Omega**2 * math.pi**2 * C.hbar**2
    return num / (beta * C.mu_B**2 * g.L_res) / field_integral(g, omega0)


def coupling_from_density(n, T, g, omega0):
    """Inverse of :func:`spin_density`."""
    if n < 0:
        raise DomainError("density must be >= 0")
    beta = polarization(omega0, T)
    fi = field_integral(g, omega0)
    return math.sqrt(n * beta * C.mu_B**2 * g.L_res * fi / (8.0 * math.pi**2 * C.hbar**2))


def density_cutoff_sensitivity(Omega, T, g, omega0, rel_step=1e-3):
    """d n / d delta_cut (m^-3) by central difference."""
    d = g.delta_cut * rel_step
    up = spin_density(Omega, T, replace(g, delta_cut=g.delta_cut + d), omega0)
    dn = spin_density(Omega, T, replace(g, delta_cut=g.delta_cut - d), omega0)
    return (up - dn) / (2 * d)


def density_breakdown(couplings, T, g, omega0):
    """Per-line densities from ``{"central": Omega, "satlow": ..., "sathigh": ...}``."""
    n = {k: spin_density(couplings.get(k, 0.0), T, g, omega0)
         for k in ("central", "satlow", "sathigh")}
    return DensityResult(n=sum(n.values()), n_central=n["central"],
                         n_satLow=n["satlow"], n_satHigh=n["sathigh"])


#: reference geometry used by tests and examples (b = 5 um, w = 2 um)
REFERENCE_GEOMETRY = StripGeometry(b=5e-6, w=2e-6, L_res=2e-3, delta_cut=DEFAULT_CUTOFF, Z=50.0)
