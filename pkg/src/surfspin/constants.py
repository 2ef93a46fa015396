"""CODATA physical constants in SI units.

Values come from :mod:`scipy.constants` (CODATA 2018).  ``hbar`` is defined as
``h / (2 pi)`` so the two never drift apart.
"""

from dataclasses import dataclass
import math

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = _sc.h
    mu_B: float = _sc.physical_constants["Bohr magneton"][0]
    mu_N: float = _sc.physical_constants["nuclear magneton"][0]
    k_B: float = _sc.k
    mu_0: float = _sc.mu_0

    @property
    def hbar(self):
        return self.h / (2.0 * math.pi)


CODATA = PhysicalConstants()

h = CODATA.h
hbar = CODATA.hbar
mu_B = CODATA.mu_B
mu_N = CODATA.mu_N
k_B = CODATA.k_B
mu_0 = CODATA.mu_0

#: free-proton nuclear g-factor
G_PROTON = 5.5856946893
#: free-electron g-factor
G_ELECTRON = 2.00231930436
#: ground-state hyperfine splitting of free atomic hydrogen, Hz
A_HYDROGEN = 1420.405751768e6


def override(**values):
    """Rebind the module-level constants (process wide); returns the new set.

    Meant for the command-line front end, which runs one configuration per
    process.  Library callers should leave the CODATA values alone.
    """
    global CODATA, h, hbar, mu_B, mu_N, k_B, mu_0
    unknown = set(values) - {"h", "mu_B", "mu_N", "k_B", "mu_0"}
    if unknown:
        raise ValueError(f"unknown constants: {sorted(unknown)}")
    CODATA = PhysicalConstants(**{**CODATA.__dict__, **values})
    h, hbar, mu_B, mu_N = CODATA.h, CODATA.hbar, CODATA.mu_B, CODATA.mu_N
    k_B, mu_0 = CODATA.k_B, CODATA.mu_0
    return CODATA
