import hashlib
import json
import math

import numpy as np
import pytest
from scipy import stats

from surfspin import lineshape as ls
from surfspin.errors import InputError
from surfspin.fitting import fit_saturation
from surfspin.io import dataset_text
from surfspin.synth import (RNG_ALGORITHM, Kind, Scenario, three_peak_scenario, sweep_model,
                            synthesize)


def _digest(sc):
    ds, man = synthesize(sc)
    return hashlib.sha256((dataset_text(ds) + json.dumps(man, sort_keys=True)).encode()).hexdigest()


@pytest.mark.parametrize("kind", [k.value for k in Kind])
def test_same_seed_same_bytes(kind):
    sc = dict(kind=kind, seed=11)
    if kind == "s21":
        sc["true_params"] = dict(n_points=2001)
    assert _digest(Scenario.from_dict(sc)) == _digest(Scenario.from_dict(json.loads(json.dumps(sc))))


def test_different_seeds_differ():
    a = dataset_text(synthesize(Scenario("angle", 1))[0])
    b = dataset_text(synthesize(Scenario("angle", 2))[0])
    assert a != b


def test_manifest_contents():
    ds, man = synthesize(three_peak_scenario())
    assert man["rng"] == RNG_ALGORITHM
    assert man["scenario"]["seed"] == 7
    assert set(man["resolved"]) == {"central", "satlow", "sathigh"}
    assert man["scenario"]["true_params"]["peaks"][0]["gamma2_hz"] == 87e6
    json.dumps(man)


def test_noise_free_sweep_equals_forward_model():
    sc = Scenario("sweep", 4, true_params=dict(n_points=501), noise=dict(qb_rel=0.0, f_rel=0.0))
    ds, _ = synthesize(sc)
    mdl = sweep_model(sc.true_params)
    qb, df = ls.sweep_point(mdl, ds.B)
    assert np.array_equal(ds.Q_inv, 1.0 / 1e5 + qb)
    assert np.array_equal(ds.f0, 5e9 + df)


def test_noise_free_s21_equals_forward_model():
    sc = Scenario("s21", 0, true_params=dict(n_points=1001), noise=dict(snr_db=math.inf))
    ds, _ = synthesize(sc)
    z = ls.s21_bare(ds.f, 5e9, 1e5, 2e5 * complex(math.cos(0.1), math.sin(0.1)))
    assert np.allclose(ds.s21, z, rtol=0, atol=1e-15)


def test_flux_jumps_only_in_frequency():
    clean, _ = synthesize(three_peak_scenario(7, flux_jumps=0))
    jumpy, man = synthesize(three_peak_scenario(7, flux_jumps=5))
    assert np.array_equal(clean.Q_inv, jumpy.Q_inv)
    rows = man["flux_jumps"]["rows"]
    changed = np.flatnonzero(clean.f0 != jumpy.f0)
    assert changed.tolist() == rows and 0 not in rows
    amp = np.abs(man["flux_jumps"]["amplitude_hz"])
    assert np.all((amp >= 20e3) & (amp <= 100e3))


def test_two_seeds_agree_within_three_sigma():
    a = fit_saturation(synthesize(Scenario("saturation", 21))[0])
    b = fit_saturation(synthesize(Scenario("saturation", 22))[0])
    assert a.values.tolist() != b.values.tolist()
    for k in a.params:
        assert abs(a.params[k] - b.params[k]) <= 3 * math.hypot(a.stderr[k], b.stderr[k]), k


def _gof(z):
    """p-value of a chi-square test of standard-normal z in 20 equiprobable bins."""
    edges = stats.norm.ppf(np.linspace(0, 1, 21))
    counts, _ = np.histogram(z, edges)
    return stats.chisquare(counts).pvalue


def test_sweep_noise_statistics():
    z = []
    for seed in range(100):
        sc = Scenario("sweep", seed, true_params=dict(n_points=201))
        ds, _ = synthesize(sc)
        qb, _ = ls.sweep_point(sweep_model(sc.true_params), ds.B)
        z.append((ds.Q_inv - 1e-5 - qb) / (0.02 * qb))
    assert _gof(np.concatenate(z)) > 0.01


def test_s21_noise_statistics():
    z = []
    for seed in range(100):
        sc = Scenario("s21", seed, true_params=dict(n_points=201))
        ds, man = synthesize(sc)
        clean = ls.s21_bare(ds.f, 5e9, 1e5, 2e5 * complex(math.cos(0.1), math.sin(0.1)))
        d = (ds.s21 - clean) / man["noise_sigma_per_component"]
        z += [d.real, d.imag]
    z = np.concatenate(z)
    assert _gof(z) > 0.01
    # 40 dB: rms complex noise is 1% of the off-resonance level
    assert man["noise_sigma_per_component"] * math.sqrt(2) == pytest.approx(0.01, rel=1e-12)


def test_saturation_noise_statistics():
    z = []
    for seed in range(100):
        sc = Scenario("saturation", seed)
        ds, _ = synthesize(sc)
        from surfspin.fitting.saturation import saturation_model
        y = saturation_model(ds.P0, 1e-6, 14e-9, 1.0)
        z.append((ds.Qs_inv / y - 1) / 0.05)
    assert _gof(np.concatenate(z)) > 0.01


def test_unknown_kind_and_keys():
    with pytest.raises(InputError):
        Scenario("nmr")
    with pytest.raises(InputError):
        synthesize({"kind": "sweep", "colour": "red"})
    with pytest.raises(InputError):
        Scenario("sweep", noise=dict(qb_rel=-0.1))
    with pytest.raises(InputError):
        Scenario("angle", artifacts=dict(flux_jumps=2))


def test_kind_aliases():
    assert Kind.parse("S21Trace") is Kind.S21
    assert Kind.parse("peak-positions") is Kind.PEAK_POSITIONS
    assert Kind.parse(Kind.ANGLE) is Kind.ANGLE
