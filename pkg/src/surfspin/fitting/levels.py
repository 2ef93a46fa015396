"""Joint fit of resonance-field positions measured on many resonators."""

import math

import numpy as np

from .. import constants as C
from ..spin_levels import Label, SpinSystem, crossings_many
from ..errors import InputError
from .lm import lm_fit, transform_result

MODEL_ID = "hydrogen_plus_free_levels"
SATELLITES = (Label.SAT_LOW.value, Label.SAT_HIGH.value)


def predicted_fields(g_H, A, g_central, f_res, labels, B_max, include_nuclear_zeeman=True,
                     n_grid=2000):
    """Resonance field of every (frequency, label) row; NaN when no crossing."""
    f_res = np.asarray(f_res, dtype=float)
    labels = np.asarray(labels)
    out = np.full(len(f_res), np.nan)
    spins = (
        (np.isin(labels, SATELLITES),
         SpinSystem.hydrogen(A=A, g_e=g_H, include_nuclear_zeeman=include_nuclear_zeeman)),
        (~np.isin(labels, SATELLITES), SpinSystem.free(g_central)),
    )
    for mask, spin in spins:
        if not mask.any():
            continue
        uf, inv = np.unique(f_res[mask], return_inverse=True)
        found = [{} for _ in uf]
        for d, lst in zip(found, crossings_many(spin, uf, B_max, n_grid=n_grid)):
            for b, l in lst:
                d.setdefault(l.value, b)
        rows = np.flatnonzero(mask)
        for r, k in zip(rows, inv):
            out[r] = found[k].get(labels[r], np.nan)
    return out


def fit_peak_positions(data, g0=2.0, A0=C.A_HYDROGEN, include_nuclear_zeeman=True,
                       n_grid=2000):
    """Fit ``g_H``, ``A`` (Hz) and ``g_central`` to a :class:`PeakPositions` set.

    Residuals are field differences in tesla.  Rows without a predicted
    crossing get a large penalty.  With fewer than three distinct resonator
    frequencies the result carries a ``rank_deficient`` flag; without any
    satellite rows ``g_H`` and ``A`` are reported as unconstrained.
    """
    labels = list(data.labels)
    bad = sorted(set(labels) - {"central", *SATELLITES})
    if bad:
        raise InputError(f"unknown peak labels: {bad}")
    f = data.f_res
    Bm = data.B_peak
    B_max = 1.5 * float(np.max(Bm)) + 0.1
    penalty = B_max

    def to_phys(v):
        return np.array([v[0], v[1] * 1e6, v[2]])

    def resid(v):
        g_H, A, g_c = to_phys(v)
        pred = predicted_fields(g_H, A, g_c, f, labels, B_max, include_nuclear_zeeman, n_grid)
        r = pred - Bm
        return np.where(np.isnan(r), penalty, r)

    v0 = [g0, A0 / 1e6, g0]
    bounds = ([0.5, 0.0, 0.5], [5.0, 1e5, 5.0])
    res = lm_fit(resid, v0, bounds=bounds, names=["g_H", "A_MHz", "g_central"],
                 x_scale=[1.0, 1e3, 1.0], model_id=MODEL_ID)
    out = transform_result(res, to_phys, ["g_H", "A", "g_central"])
    n_freq = len(set(np.round(f, 3).tolist()))
    if n_freq < 3:
        out.flags.append(f"rank_deficient:only_{n_freq}_distinct_frequencies")
    if not any(l in SATELLITES for l in labels):
        for k in ("g_H", "A"):
            out.stderr[k] = math.inf
            out.ci95[k] = (-math.inf, math.inf)
            if f"unconstrained:{k}" not in out.flags:
                out.flags.append(f"unconstrained:{k}")
    out.derived["n_frequencies"] = n_freq
    return out


def g2_offsets(data, g_ref=2.0):
    """Frequency minus the ``g_ref`` free-spin line at each measured field (Hz)."""
    return data.f_res - g_ref * C.mu_B * data.B_peak / C.h
