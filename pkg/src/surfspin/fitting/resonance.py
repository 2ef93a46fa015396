"""Complex-plane fit of a notch-type resonance with complex coupling Q.

Model (frequencies in Hz)::

    S21(f) = a exp(i phi) * (1 + (w0/Qc) / (2 pi i (f - f0) - w0/Q)),  w0 = 2 pi f0

The off-resonant point ``a exp(i phi)`` absorbs line attenuation and phase.
Starting values come from an algebraic circle fit followed by a fit of the
phase angle around the circle centre; the final estimate is a full complex
least-squares fit.
"""

import math

import numpy as np

from ..errors import FitError, InputError
from .lm import lm_fit, transform_result

MODEL_ID = "notch_complex_qc"


def circle_fit(z):
    """Algebraic (Kasa) circle fit; returns ``(centre, radius)``."""
    x, y = z.real, z.imag
    A = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    c = np.linalg.lstsq(A, b, rcond=None)[0]
    xc, yc = c[0] / 2, c[1] / 2
    r = math.sqrt(max(c[2] + xc * xc + yc * yc, 0.0))
    return complex(xc, yc), r


def _noise_level(z):
    d = np.diff(z)
    mad = np.median(np.abs(d - np.median(d.real) - 1j * np.median(d.imag)))
    return mad / math.sqrt(2) / 0.8326  # median |complex gaussian| = 0.8326 sigma_per_axis*sqrt2


def _model(p, f):
    f0, Q, qc_abs, qc_arg, a, phi = p
    w0 = 2 * math.pi * f0
    Qc = qc_abs * np.exp(1j * qc_arg)
    return a * np.exp(1j * phi) * (1.0 + (w0 / Qc) / (2j * math.pi * (f - f0) - w0 / Q))


def _initial_guess(f, z):
    n = len(f)
    k = max(3, n // 20)
    off = np.mean(np.concatenate([z[:k], z[-k:]]))
    if abs(off) == 0:
        raise FitError("trace has zero off-resonant transmission")
    zn = z / off
    dev = np.abs(zn - 1.0)
    sigma = _noise_level(zn)
    i0 = int(np.argmax(dev))
    if dev[i0] < max(8.0 * sigma, 1e-9):
        raise FitError(f"no resonance detected: largest excursion {dev[i0]:.3g} "
                       f"vs noise {sigma:.3g}")
    zc, r = circle_fit(zn)
    # phase of points around the circle centre: theta0 + 2 atan(Q (f - f0)/f0)
    theta = np.unwrap(np.angle(zn - zc))
    half = dev > 0.5 * dev[i0]
    span = f[half].max() - f[half].min() if half.sum() > 1 else (f[-1] - f[0]) / n
    f0g = f[i0]
    Qg = f0g / max(span, (f[1] - f[0]))

    def res(p):
        return p[0] + 2 * np.arctan(p[2] * (f - p[1]) / p[1]) - theta

    ph = lm_fit(res, [theta[i0], f0g, Qg], x_scale=[1.0, span, Qg])
    th0, f0g, Qg = ph.values
    Qg = abs(Qg)
    # S21 - 1 = -(Q/Qc) / (1 - i t): diameter |Q/Qc|, angle of -Q/Qc is theta0
    qc_abs = Qg / max(2 * r, 1e-12)
    qc_arg = math.remainder(math.pi - th0, 2 * math.pi)
    return np.array([f0g, Qg, qc_abs, qc_arg, abs(off), math.atan2(off.imag, off.real)]), sigma


def fit_resonance(f, s21, model_id=MODEL_ID):
    """Fit ``(f0, Q, Qc)`` to a transmission trace.

    Returns a FitResult with parameters ``f0, Q, Qc_abs, Qc_arg, a, phi``;
    ``derived`` carries ``Qc`` (complex), ``Qi`` and ``Qc_re``.
    """
    f = np.asarray(f, dtype=float)
    z = np.asarray(s21, dtype=complex)
    if f.ndim != 1 or f.shape != z.shape or len(f) < 10:
        raise InputError("need matching 1-d f and S21 arrays with at least 10 points")
    if np.any(np.diff(f) <= 0):
        raise InputError("frequency axis must be strictly increasing")
    p0, sigma = _initial_guess(f, z)
    f_ref, lw = p0[0], p0[0] / p0[1]

    # internal coordinates: detuning in linewidths, log magnitudes
    def to_phys(v):
        x, lq, lqc, arg, la, phi = v
        return np.array([f_ref + x * lw, math.exp(lq), math.exp(lqc), arg, math.exp(la), phi])

    def resid(v):
        d = _model(to_phys(v), f) - z
        return np.concatenate([d.real, d.imag])

    v0 = np.array([0.0, math.log(p0[1]), math.log(p0[2]), p0[3], math.log(p0[4]), p0[5]])
    res = lm_fit(resid, v0, names=["x", "lnQ", "lnQc", "Qc_arg", "ln_a", "phi"],
                 x_scale=np.ones(6), model_id=model_id)
    out = transform_result(res, to_phys, ["f0", "Q", "Qc_abs", "Qc_arg", "a", "phi"])
    Q, qa, qarg = out.params["Q"], out.params["Qc_abs"], out.params["Qc_arg"]
    Qc = qa * complex(math.cos(qarg), math.sin(qarg))
    inv_qi = 1.0 / Q - (1.0 / Qc).real
    out.derived.update({
        "Qc": Qc,
        "Qc_re": Qc.real,
        "Qi": 1.0 / inv_qi if inv_qi > 0 else math.inf,
        "noise_sigma": sigma,
    })
    return out
