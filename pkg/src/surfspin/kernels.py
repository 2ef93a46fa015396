"""Hot numeric kernels with a numba path and a pure-numpy path.

The public names (:func:`faddeeva`, :func:`strip_inverse_product_sum`) dispatch
on :data:`surfspin._accel.USE_NUMBA`.  Both paths are always importable so the
two can be compared against each other (``benchmarks/bench_kernels.py``).
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# Weideman's rational expansion of w(z); N=32 terms keeps the relative error
# near 1e-13 over the whole closed upper half plane.
_WEIDEMAN_N = 32


def _weideman_coefficients(n):
    m = 2 * n
    k = np.arange(-m + 1, m)
    L = math.sqrt(n / math.sqrt(2.0))
    t = L * np.tan(k * np.pi / m / 2.0)
    f = np.concatenate([[0.0], np.exp(-t**2) * (L**2 + t**2)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return L, np.ascontiguousarray(a[1:n + 1][::-1])


_L, _A = _weideman_coefficients(_WEIDEMAN_N)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


# --------------------------------------------------------------------------
# Faddeeva function
# --------------------------------------------------------------------------

def _faddeeva_upper_numpy(z):
    iz = 1j * z
    den = _L - iz
    Z = (_L + iz) / den
    p = np.zeros_like(Z)
    for c in _A:
        p = p * Z + c
    return 2.0 * p / (den * den) + _INV_SQRT_PI / den


def faddeeva_numpy(z):
    z = np.asarray(z, dtype=np.complex128)
    lower = z.imag < 0
    zz = np.where(lower, -z, z)
    w = _faddeeva_upper_numpy(zz)
    if np.any(lower):
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.where(lower, 2.0 * np.exp(-z * z) - w, w)
    return w


@njit
def _faddeeva_scalar_nb(z, L, a):
    lower = z.imag < 0.0
    if lower:
        z = -z
    iz = 1j * z
    den = L - iz
    Z = (L + iz) / den
    p = 0j
    for i in range(a.shape[0]):
        p = p * Z + a[i]
    w = 2.0 * p / (den * den) + _INV_SQRT_PI / den
    if lower:
        w = 2.0 * np.exp(-z * z) - w
    return w


@njit
def _faddeeva_flat_nb(z, L, a, out):
    for i in range(z.shape[0]):
        out[i] = _faddeeva_scalar_nb(z[i], L, a)


def faddeeva_numba(z):
    z = np.asarray(z, dtype=np.complex128)
    flat = np.ascontiguousarray(z).ravel()
    out = np.empty_like(flat)
    _faddeeva_flat_nb(flat, _L, _A, out)
    return out.reshape(z.shape)


def faddeeva(z):
    """Faddeeva function ``w(z) = exp(-z**2) erfc(-i z)``.

    Accepts scalars or arrays; returns complex128 of the same shape.  For
    ``Im z < 0`` the reflection ``w(z) = 2 exp(-z**2) - w(-z)`` is applied,
    which overflows for large ``|z|`` deep in the lower half plane.
    """
    scalar = np.ndim(z) == 0
    w = faddeeva_numba(z) if USE_NUMBA else faddeeva_numpy(z)
    return complex(w) if scalar else w


# --------------------------------------------------------------------------
# Midpoint sum of 1/|(x^2-b^2)(x^2-S^2)| for the two-strip field profile
# --------------------------------------------------------------------------

def strip_inverse_product_sum_numpy(lo, hi, n, b, S, chunk=1 << 20):
    h = (hi - lo) / n
    total = 0.0
    for start in range(0, n, chunk):
        i = np.arange(start, min(n, start + chunk), dtype=np.float64)
        x2 = (lo + (i + 0.5) * h) ** 2
        total += np.sum(1.0 / np.abs((x2 - b * b) * (x2 - S * S)))
    return total * h


@njit
def strip_inverse_product_sum_numba(lo, hi, n, b, S):
    h = (hi - lo) / n
    b2 = b * b
    S2 = S * S
    total = 0.0
    for i in range(n):
        x = lo + (i + 0.5) * h
        x2 = x * x
        total += 1.0 / abs((x2 - b2) * (x2 - S2))
    return total * h


def strip_inverse_product_sum(lo, hi, n, b, S):
    """Midpoint-rule integral of ``1/|(x^2-b^2)(x^2-S^2)|`` over ``[lo, hi]``."""
    if USE_NUMBA:
        return float(strip_inverse_product_sum_numba(float(lo), float(hi), int(n), float(b), float(S)))
    return float(strip_inverse_product_sum_numpy(lo, hi, int(n), b, S))
