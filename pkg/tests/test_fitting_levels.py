import math

import numpy as np
import pytest

from surfspin import constants as C
from surfspin.datasets import PeakPositions
from surfspin.errors import InputError
from surfspin.fitting import fit_peak_positions, g2_offsets
from surfspin.fitting.levels import predicted_fields
from surfspin.synth import Scenario, synthesize

A = 1423e6


@pytest.fixture(scope="module")
def noiseless():
    ds, _ = synthesize(Scenario("peak_positions", 0, noise=dict(B_sigma=0.0)))
    return ds


def _subset(ds, mask):
    return PeakPositions(ds.f_res[mask], ds.B_peak[mask], tuple(np.array(ds.labels)[mask]))


def test_noiseless_recovery(noiseless):
    r = fit_peak_positions(noiseless)
    assert r.converged
    assert abs(r.params["A"] - A) < 1e6
    assert r.params["A"] == pytest.approx(A, rel=1e-6)
    assert r.params["g_H"] == pytest.approx(2.0, rel=1e-6)
    assert r.params["g_central"] == pytest.approx(2.0, rel=1e-6)
    assert not any(f.startswith("rank_deficient") for f in r.flags)


def test_forward_model_reproduces_data(noiseless):
    pred = predicted_fields(2.0, A, 2.0, noiseless.f_res, noiseless.labels, 1.0)
    assert np.allclose(pred, noiseless.B_peak, rtol=0, atol=1e-11)


def test_free_spin_only(noiseless):
    m = np.array([l == "central" for l in noiseless.labels])
    r = fit_peak_positions(_subset(noiseless, m))
    assert r.params["g_central"] == pytest.approx(2.0, rel=1e-9)
    assert math.isinf(r.stderr["A"]) and math.isinf(r.stderr["g_H"])
    assert "unconstrained:A" in r.flags


def test_single_frequency_flagged(noiseless):
    m = np.isclose(noiseless.f_res, 5.3e9)
    r = fit_peak_positions(_subset(noiseless, m))
    assert "rank_deficient:only_1_distinct_frequencies" in r.flags


def test_unknown_label():
    with pytest.raises(InputError):
        fit_peak_positions(PeakPositions([5e9], [0.18], ("bogus",)))


def test_offsets_split_about_half_a(noiseless):
    off = g2_offsets(noiseless)
    lab = np.array(noiseless.labels)
    f = noiseless.f_res
    assert np.all(np.abs(off[lab == "central"]) < 1.0)
    lo, hi = off[lab == "satlow"], off[lab == "sathigh"]
    assert np.all(lo > 0) and np.all(hi < 0)
    fr = np.unique(f)
    # splitting tends to A, centroid to the second-order shift A^2 / 4f
    split = lo - hi
    assert np.all(np.diff(split) < 0)
    assert split[-1] == pytest.approx(A, rel=0.02)
    assert np.allclose(0.5 * (lo + hi), A**2 / (4 * fr), rtol=0.1)


def test_offsets_are_free_line_residuals():
    d = PeakPositions([5e9], [5e9 * C.h / (2.0 * C.mu_B)], ("central",))
    assert g2_offsets(d)[0] == pytest.approx(0.0, abs=1e-5)
