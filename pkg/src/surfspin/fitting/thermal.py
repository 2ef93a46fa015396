"""Temperature dependence of peak areas and spin-system model comparison."""

import math

import numpy as np

from ..spin_levels import Label, SpinSystem, peak_area_factor, transitions
from ..errors import InputError
from .lm import lm_fit

MODEL_ID = "thermal_peak_areas"


def _line(spin, B, label):
    lines = [t for t in transitions(spin, B) if t.label is Label(label)]
    if not lines:
        raise InputError(f"no {label} transition for {spin.kind.value} at B={B} T")
    return lines[0]


def thermal_factors(spin, B, label, T):
    """``peak_area_factor`` of the labelled line over an array of temperatures."""
    t = _line(spin, B, label)
    return np.array([peak_area_factor(spin, t, B, float(Ti)) for Ti in np.atleast_1d(T)])


def aicc(rss, n, k):
    if n - k - 1 <= 0 or rss <= 0:
        return -math.inf if rss <= 0 else math.inf
    return n * math.log(rss / n) + 2 * k + 2 * k * (k + 1) / (n - k - 1)


def _fit_scale(area, factor, err, name, model_id):
    w = 1.0 / err if err is not None else np.ones_like(area)
    s0 = float(np.sum(w * w * area * factor) / max(np.sum(w * w * factor * factor), 1e-300))
    return lm_fit(lambda p: w * (p[0] * factor - area), [s0 if s0 > 0 else 1.0],
                  names=[name], absolute_sigma=err is not None, model_id=model_id)


def fit_temperature(ts, hypotheses, B_peaks, satellite_spin=None, central="central"):
    """Fit ``area(T) = scale * peak_area_factor`` for every peak and hypothesis.

    ``hypotheses`` maps a name to the SpinSystem proposed for the central
    peak; satellite peaks use ``satellite_spin`` (hydrogen by default).  The
    returned dict has ``results`` (per hypothesis FitResult of the central
    peak), ``ranking`` (names sorted by residual norm), ``aicc``,
    ``satellites`` (FitResults) and ``abundance`` ``n_H / n_e``.
    """
    if len(ts.T) < 3:
        raise InputError("at least three temperatures are required")
    if isinstance(hypotheses, (list, tuple)):
        hypotheses = {h.kind.value: h for h in hypotheses}
    satellite_spin = satellite_spin or SpinSystem.hydrogen()
    T = ts.T
    err = ts.errors.get(central)
    results, scores = {}, {}
    for name, spin in hypotheses.items():
        fac = thermal_factors(spin, B_peaks[central], Label.CENTRAL, T)
        r = _fit_scale(ts.areas[central], fac, err, "scale", f"{MODEL_ID}:{name}")
        r.derived["factor_T"] = fac
        results[name] = r
        scores[name] = aicc(r.residual_norm**2, len(T), 1)
    ranking = sorted(results, key=lambda k: results[k].residual_norm)
    sats = {}
    for lab in (Label.SAT_LOW.value, Label.SAT_HIGH.value):
        if lab in ts.areas:
            fac = thermal_factors(satellite_spin, B_peaks[lab], lab, T)
            sats[lab] = _fit_scale(ts.areas[lab], fac, ts.errors.get(lab), "scale", f"{MODEL_ID}:{lab}")
    best = results[ranking[0]]
    abundance = None
    if sats:
        # each hydrogen line is an independent estimate of the H population
        n_H = float(np.mean([r.params["scale"] for r in sats.values()]))
        abundance = n_H / best.params["scale"]
    ratio = (results[ranking[1]].residual_norm / max(best.residual_norm, 1e-300)
             if len(ranking) > 1 else math.inf)
    return {
        "results": results,
        "ranking": ranking,
        "aicc": scores,
        "residual_ratio": ratio,
        "satellites": sats,
        "abundance": abundance,
    }


def abundance_from_areas(areas, T, B_peaks, central_spin=None, satellite_spin=None):
    """``n_H / n_e`` from single-temperature areas corrected by thermal factors."""
    central_spin = central_spin or SpinSystem.free()
    satellite_spin = satellite_spin or SpinSystem.hydrogen()
    n_e = areas["central"] / thermal_factors(central_spin, B_peaks["central"], "central", T)[0]
    est = [areas[l] / thermal_factors(satellite_spin, B_peaks[l], l, T)[0]
           for l in (Label.SAT_LOW.value, Label.SAT_HIGH.value)]
    return float(np.mean(est) / n_e)
