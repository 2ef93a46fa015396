"""Field-sweep spectral fit.

The loss spectrum ``Qb_inv(B)`` (and, optionally, the resonance shift) is fitted
with the sum of the template's peaks plus the broad background.  Internally
fields are in mT, rates in 2 pi MHz and the loss is normalized to its maximum,
which keeps the Jacobian well conditioned.
"""

from dataclasses import replace
import math

import numpy as np
from scipy.signal import find_peaks, savgol_filter

from .. import lineshape as ls
from ..errors import InputError
from .lm import lm_fit, transform_result

MODEL_ID = "sweep_peaks_background"
MHZ = 2 * math.pi * 1e6


def _layout(template, fit_background):
    names = []
    for p in template.peaks:
        names += [f"{p.label}.B_peak", f"{p.label}.Omega", f"{p.label}.gamma2"]
        if p.shape is ls.Shape.VOIGT:
            names.append(f"{p.label}.Delta")
    if fit_background:
        names += ["bg.c", "bg.B_on", "bg.sigma_on"]
    return names


def _pack(template, fit_background, qscale):
    v, lo, hi = [], [], []
    for p in template.peaks:
        v += [p.B_peak * 1e3, p.Omega / MHZ, p.gamma2 / MHZ]
        lo += [-np.inf, 0.0, 1e-6]
        hi += [np.inf] * 3
        if p.shape is ls.Shape.VOIGT:
            v.append(p.Delta / MHZ)
            lo.append(1e-6)
            hi.append(np.inf)
    if fit_background:
        bg = template.background
        v += [bg.c / qscale, bg.B_on * 1e3, bg.sigma_on * 1e3]
        lo += [0.0, -np.inf, 1e-3]
        hi += [np.inf] * 3
    return np.array(v), (np.array(lo), np.array(hi))


def _unpack(v, template, fit_background, qscale):
    peaks = []
    i = 0
    for p in template.peaks:
        kw = dict(B_peak=v[i] * 1e-3, Omega=abs(v[i + 1]) * MHZ, gamma2=abs(v[i + 2]) * MHZ)
        i += 3
        if p.shape is ls.Shape.VOIGT:
            kw["Delta"] = abs(v[i]) * MHZ
            i += 1
        peaks.append(replace(p, **kw))
    bg = template.background
    if fit_background:
        bg = ls.Background(c=abs(v[i]) * qscale, B_on=v[i + 1] * 1e-3, sigma_on=abs(v[i + 2]) * 1e-3)
    return replace(template, peaks=tuple(peaks), background=bg)


def _robust_sigma(y):
    """Noise level from the median absolute second difference."""
    d2 = np.diff(y, 2)
    if d2.size == 0:
        return 0.0
    return float(np.median(np.abs(d2 - np.median(d2))) / 0.6745 / math.sqrt(6.0))


def _slope(p):
    return p.slope() if p.B_peak >= 0 else replace(p, B_peak=0.0).slope()


def peak_height(p, omega0):
    """Qb_inv at the centre of peak ``p``."""
    return float(-ls.ensemble_response(p, omega0, omega0).real / omega0)


def initialize(trace, template, window=0.01):
    """Refine template starting values from the data.

    Each peak centre moves to the most prominent local maximum of the smoothed
    loss within ``window`` tesla; its coupling is set to reproduce the local
    height above the background estimate.
    """
    B, qb = trace.B, trace.Qb_inv
    omega0 = template.resonator.omega0
    n = len(B)
    wl = min(n - (1 - n % 2), max(5, (n // 200) * 2 + 1))
    smooth = savgol_filter(qb, wl, 2) if n > wl else qb
    bg = template.background
    base = ls.background_loss(bg, B)
    sig = smooth - base
    idx, props = find_peaks(sig, prominence=0.05 * max(np.max(np.abs(sig)), 1e-300))
    peaks = []
    for p in template.peaks:
        near = idx[np.abs(B[idx] - p.B_peak) <= window]
        if near.size:
            k = near[np.argmax(sig[near])]
            p = replace(p, B_peak=float(B[k]))
            h = sig[k]
        else:
            h = float(np.interp(p.B_peak, B, sig)) if B[0] < B[-1] else float(np.interp(p.B_peak, B[::-1], sig[::-1]))
        h1 = peak_height(replace(p, Omega=1.0), omega0)
        if h > 0 and h1 > 0:
            p = replace(p, Omega=math.sqrt(h / h1))
        peaks.append(p)
    return replace(template, peaks=tuple(peaks))


def _noise_model(resid, model):
    """``(abs_floor, rel)`` such that sigma_i^2 = abs_floor^2 + (rel * model_i)^2."""
    top = np.max(np.abs(model)) if model.size else 0.0
    low = np.abs(model) < 0.05 * top
    high = np.abs(model) > 0.3 * top
    mad = lambda x: float(np.median(np.abs(x - np.median(x))) / 0.6745) if x.size else 0.0
    floor = mad(resid[low]) if low.sum() >= 10 else mad(resid)
    rel = 0.0
    if high.sum() >= 10:
        excess = mad(resid[high] / np.abs(model[high]))
        rel = math.sqrt(max(excess**2 - (floor / np.median(np.abs(model[high]))) ** 2, 0.0))
    floor = max(floor, 1e-6 * top, 1e-300)
    return floor, rel


def _drop_last(res):
    names = res.names[:-1]
    res.params = {k: res.params[k] for k in names}
    res.stderr = {k: res.stderr[k] for k in names}
    res.ci95 = {k: res.ci95[k] for k in names}
    res.covariance = res.covariance[:-1, :-1]
    return res


def fit_sweep(trace, template, robust=False, use_shift=False, fit_background=True,
              auto_init=True, weighted=True, f_scale=2.0, max_iter=200):
    """Fit peaks and background of ``template`` to a :class:`SweepTrace`.

    Parameters are named ``<label>.B_peak`` (T), ``<label>.Omega``,
    ``<label>.gamma2``, ``<label>.Delta`` (rad/s) and ``bg.c``, ``bg.B_on``,
    ``bg.sigma_on``.  ``derived`` holds per-peak areas (integral of Qb_inv
    over B, in T), ``T2e`` of Lorentzian peaks and the noise model.

    A first unweighted pass fits the loss alone.  When ``weighted`` is set the
    residuals of that pass give a noise model (additive floor plus a part
    proportional to the signal) and a second pass is run with those weights,
    including the frequency shift if ``use_shift``.  ``robust`` uses a
    soft-L1 loss in that pass, with scale ``f_scale`` standard deviations, so
    isolated frequency jumps barely pull on the fit.
    """
    names = _layout(template, fit_background)
    m = len(trace) * (2 if use_shift else 1)
    if m <= len(names):
        raise InputError(f"{len(trace)} sweep points cannot constrain {len(names)} parameters")
    if auto_init:
        template = initialize(trace, template)
    omega0 = template.resonator.omega0
    B = trace.B
    B_ref = np.array([trace.B_ref])
    qb = trace.Qb_inv
    df = trace.df
    qscale = max(float(np.max(np.abs(qb))), 1e-30)

    def model_of(v):
        return _unpack(v, template, fit_background, qscale)

    def predict(v):
        mdl = model_of(v)
        # line slopes follow the current peak fields (levels need B >= 0)
        slopes = [_slope(p) for p in mdl.peaks]
        mq, mdf = ls.sweep_point(mdl, B, slopes)
        rq, rdf = ls.sweep_point(mdl, B_ref, slopes)
        return mq - rq[0], mdf - rdf[0]

    v0, bounds = _pack(template, fit_background, qscale)
    first = lm_fit(lambda v: (predict(v)[0] - qb) / qscale, v0, bounds=bounds, names=names,
                   max_iter=max_iter, model_id=MODEL_ID)
    res = first
    noise = {}
    if weighted or use_shift or robust:
        mq, mdf = predict(first.values)
        floor, rel = _noise_model(qb - mq, mq)
        sq = np.sqrt(floor**2 + (rel * mq) ** 2)
        noise.update(qb_floor=floor, qb_rel=rel)
        if use_shift:
            d = df - mdf
            d = d - np.median(d)
            sf = float(np.median(np.abs(d - np.median(d))) / 0.6745)
            sf = max(sf, 1e-6 * max(np.max(np.abs(mdf)), 1e-300), 1e-300)
            noise["df_sigma"] = sf

        k = len(names)

        def resid(v):
            pq, pdf = predict(v[:k])
            r = (pq - qb) / sq
            if use_shift:
                # the reference frequency itself is noisy: free offset in Hz
                r = np.concatenate([r, (pdf + v[k] - df) / noise["df_sigma"]])
            return r

        start, lo, hi, nm = first.values, bounds[0], bounds[1], names
        if use_shift:
            start = np.append(start, float(np.median(df - mdf)))
            lo, hi, nm = np.append(lo, -np.inf), np.append(hi, np.inf), names + ["shift.offset"]
        xs = np.where(start != 0, np.abs(start), 1.0)
        if use_shift:
            xs[-1] = noise["df_sigma"]
        res = lm_fit(resid, start, bounds=(lo, hi), names=nm, x_scale=xs,
                     loss="soft_l1" if robust else "linear", f_scale=f_scale,
                     max_iter=max_iter, model_id=MODEL_ID)
        if use_shift:
            noise["df_offset"] = res.params["shift.offset"]
            res = _drop_last(res)

    def to_phys(v):
        mdl = model_of(v)
        out = []
        for p in mdl.peaks:
            out += [p.B_peak, p.Omega, p.gamma2]
            if p.shape is ls.Shape.VOIGT:
                out.append(p.Delta)
        if fit_background:
            bg = mdl.background
            out += [bg.c, bg.B_on, bg.sigma_on]
        return np.array(out)

    fitted = model_of(res.values)
    out = transform_result(res, to_phys, names)
    for p in fitted.peaks:
        s = _slope(p)
        out.derived[f"{p.label}.area_T"] = math.pi * p.Omega**2 / (omega0 * abs(s))
        out.derived[f"{p.label}.area_rad"] = math.pi * p.Omega**2
        if p.shape is ls.Shape.LORENTZIAN:
            out.derived[f"{p.label}.T2e"] = p.T2e
    out.derived.update({f"noise.{k}": v for k, v in noise.items()})
    out.derived["loss"] = "soft_l1" if robust else "linear"
    out.model = fitted
    return out


def decompose(model, B, slopes=None):
    """Per-component loss curves ``{label: Qb_inv(B)}`` plus ``background``."""
    omega0 = model.resonator.omega0
    if slopes is None:
        slopes = [p.slope() for p in model.peaks]
    comps = {}
    for p, s in zip(model.peaks, slopes):
        W = ls.ensemble_response(p, omega0, ls.spin_frequency(p, omega0, B, s))
        comps[p.label] = -W.real / omega0
    comps["background"] = ls.background_loss(model.background, B)
    return comps
