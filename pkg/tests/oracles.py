"""Independent reference computations shared by the test modules."""

import math

import mpmath as mp
from scipy import constants as sc, integrate

LN2 = math.log(2.0)


def voigt_by_quadrature(Omega, gamma2, Delta, detuning):
    """Gaussian (HWHM Delta, unit mass) convolution of the Lorentzian response."""
    norm = math.sqrt(LN2 / math.pi) / Delta

    def part(fn):
        g = lambda u: norm * math.exp(-LN2 * u * u / (Delta * Delta)) * fn(u)
        lim = 12 * Delta / math.sqrt(LN2)
        pts = sorted({max(-lim, min(lim, detuning)), 0.0})
        val, _ = integrate.quad(g, -lim, lim, points=pts, limit=800, epsabs=0, epsrel=1e-12)
        return val

    L = lambda u: Omega**2 / (1j * (detuning - u) - gamma2 / 2)
    return complex(part(lambda u: L(u).real), part(lambda u: L(u).imag))


def faddeeva_mp(z, dps=30):
    with mp.workdps(dps):
        zz = mp.mpc(z.real, z.imag)
        return complex(mp.exp(-zz * zz) * mp.erfc(-1j * zz))


def strip_oracles(b, w, Z=50.0, delta=140e-9, f=5e9, dps=30):
    """(|B(0,0)|, field integral, alpha) of a two-strip geometry with mpmath."""
    with mp.workdps(dps):
        h = mp.mpf(sc.h)
        hbar = h / (2 * mp.pi)
        mu0 = mp.mpf(sc.mu_0)
        b, w, Z, d = mp.mpf(b), mp.mpf(w), mp.mpf(Z), mp.mpf(delta)
        S = b + w
        om = 2 * mp.pi * mp.mpf(f)
        I0 = mp.sqrt(2 * hbar * om**2 / Z)
        K = mp.ellipk(1 - (b / S) ** 2)
        pref = mu0 * I0 * S / (2 * K)
        fx = lambda x: 1 / abs((x**2 - b**2) * (x**2 - S**2))
        J = 2 * (mp.quad(fx, [0, b - d]) + mp.quad(fx, [b + d, (b + S) / 2, S - d])
                 + mp.quad(fx, [S + d, 2 * S, 10 * S, mp.inf]))
        al = mu0 / (2 * mp.sqrt(2 * Z) * S * K * w) * mp.quad(
            lambda x: S**2 / mp.sqrt(abs((x**2 - b**2) * (x**2 - S**2))), [S, S + w])
        return float(pref / (b * S)), float(pref**2 * J), float(al)
