"""CW power saturation of the spin loss and the T1 estimate derived from it."""

import math

import numpy as np

from .. import constants as C
from ..errors import DomainError, InputError
from .lm import lm_fit, transform_result

MODEL_ID = "power_saturation"


def saturation_model(P0, Qs0_inv, P_sat, epsilon):
    return Qs0_inv / (1.0 + np.asarray(P0) / P_sat) ** epsilon


def fit_saturation(curve):
    """Fit ``Qs0_inv``, ``P_sat`` (W, circulating) and ``epsilon``.

    Residuals are logarithmic, which matches multiplicative noise.  If the
    largest circulating power stays below the fitted ``P_sat`` the result is
    flagged ``P_sat_lower_bound``.
    """
    P0 = curve.P0
    y = curve.Qs_inv
    if len(P0) < 4:
        raise InputError("at least four powers are required")
    if np.any(y <= 0):
        raise InputError("spin loss must be positive")
    ly = np.log(y)
    lq0 = float(np.max(ly[: max(2, len(ly) // 5)]))
    # first crossing of half the plateau as P_sat guess
    half = np.flatnonzero(ly < lq0 - math.log(2.0))
    lps0 = math.log(P0[half[0]]) if half.size else math.log(P0[-1])

    def resid(v):
        return np.log(saturation_model(P0, math.exp(v[0]), math.exp(v[1]), v[2])) - ly

    res = lm_fit(resid, [lq0, lps0, 1.0], names=["ln_Qs0_inv", "ln_P_sat", "epsilon"],
                 bounds=([-np.inf, -np.inf, 1e-3], [np.inf, np.inf, 10.0]),
                 x_scale=[1.0, 1.0, 1.0], model_id=MODEL_ID)
    out = transform_result(res, lambda v: np.array([math.exp(v[0]), math.exp(v[1]), v[2]]),
                           ["Qs0_inv", "P_sat", "epsilon"])
    if P0[-1] < out.params["P_sat"]:
        out.flags.append("P_sat_lower_bound")
    out.derived["P_sat_drive"] = out.params["P_sat"] * curve.Q_ext / (2.0 * curve.Q**2)
    return out


def gyromagnetic_ratio_hz(g_e):
    """``g mu_B / h`` in Hz/T."""
    return g_e * C.mu_B / C.h


def derive_t1(P_sat, T2e, alpha, g_e=2.0):
    """``T1 = 1 / (P_sat T2e gamma_e^2 alpha^2)`` with gamma_e in Hz/T."""
    if not (P_sat > 0 and T2e > 0 and alpha > 0 and g_e > 0):
        raise DomainError("all arguments must be positive")
    return 1.0 / (P_sat * T2e * gyromagnetic_ratio_hz(g_e) ** 2 * alpha**2)


def t2e_from_linewidth(gamma2):
    """``T2e = 2 pi / gamma2`` for a homogeneous width in rad/s."""
    if not gamma2 > 0:
        raise DomainError("linewidth must be positive")
    return 2.0 * math.pi / gamma2
