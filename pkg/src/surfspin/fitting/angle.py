"""In-plane angular dependence of the apparent g-factor."""

import numpy as np

from ..errors import InputError
from .lm import lm_fit

MODEL_ID = "g_vs_angle"


def angle_model(theta_deg, g_true, a, b):
    th = np.deg2rad(theta_deg)
    return g_true + a * np.sin(th) + b * np.sin(2 * th)


def fit_angle(series):
    """Fit ``g(theta) = g_true + a sin(theta) + b sin(2 theta)``.

    ``g_true`` is the value at ``theta = 0``.  Data at a single angle leave
    ``a`` and ``b`` unconstrained; they are flagged, not raised.
    """
    th, g = series.theta_deg, series.g
    if len(th) < 3:
        raise InputError("at least three angles are required")
    res = lm_fit(lambda p: angle_model(th, *p) - g, [float(np.mean(g)), 0.0, 0.0],
                 names=["g_true", "a", "b"], x_scale=[1.0, 0.01, 0.01], model_id=MODEL_ID)
    grid = np.linspace(0.0, 90.0, 901)
    curve = angle_model(grid, *res.values)
    res.derived["theta_max_deg"] = float(grid[np.argmax(curve)])
    res.derived["g_max"] = float(np.max(curve))
    return res
