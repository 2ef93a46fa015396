import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import ellipk

from surfspin import constants as C
from surfspin import geometry as geo
from surfspin.errors import DomainError, SingularityError
from surfspin.geometry import REFERENCE_GEOMETRY as REF, StripGeometry

from oracles import strip_oracles

W5 = 2 * math.pi * 5e9
# frozen mpmath values for the reference geometry at 5 GHz (40 digits)
K_HALF = 1.685750354812596042871
I0_5GHZ_50 = 6.452350471790976542e-8
B_MIDGAP = 4.393472549922511779e-9
FIELD_INTEGRAL_REF = 1.766447127162961439e-21
ALPHA_REF = 0.015508716752746019


def test_elliptic_k_values():
    assert geo.elliptic_k(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert geo.elliptic_k(0.5) == pytest.approx(K_HALF, rel=1e-12)
    assert geo.elliptic_k(0.5) == pytest.approx(1.6857504, abs=1e-7)
    quad, _ = integrate.quad(lambda t: 1 / math.sqrt(1 - 0.25 * math.sin(t) ** 2), 0, math.pi / 2,
                             epsabs=0, epsrel=1e-13)
    assert geo.elliptic_k(0.5) == pytest.approx(quad, rel=1e-12)


@given(st.floats(0.0, 0.999999))
def test_elliptic_k_vs_scipy(k):
    assert geo.elliptic_k(k) == pytest.approx(ellipk(k * k), rel=1e-12)


def test_elliptic_k_monotone_and_domain():
    k = np.linspace(0, 0.9999, 500)
    v = [geo.elliptic_k(x) for x in k]
    assert np.all(np.diff(v) > 0)
    for bad in (1.0, 1.5, -0.1):
        with pytest.raises(DomainError):
            geo.elliptic_k(bad)


def test_single_photon_current():
    I0 = geo.single_photon_current(W5, 50.0)
    assert I0 == pytest.approx(I0_5GHZ_50, rel=1e-12)
    assert I0 == pytest.approx(6.45e-8, abs=0.005e-8)
    assert geo.single_photon_current(2 * W5, 50.0) == pytest.approx(2 * I0, rel=1e-14)
    assert geo.single_photon_current(W5, 200.0) == pytest.approx(I0 / 2, rel=1e-14)


def test_strip_field_symmetry_and_asymptotics():
    x = np.linspace(0.1e-6, 50e-6, 137)
    a = np.abs(geo.strip_field(REF, W5, x))
    b = np.abs(geo.strip_field(REF, W5, -x))
    assert np.allclose(a, b, rtol=1e-14)
    far = np.array([1e-2, 1e-1])
    pref = C.mu_0 * geo.single_photon_current(W5, REF.Z) * REF.S / (2 * geo.elliptic_k(
        math.sqrt(1 - (REF.b / REF.S) ** 2)))
    ratio = np.abs(geo.strip_field(REF, W5, far)) * far**2 / pref
    assert np.allclose(ratio, 1.0, rtol=1e-5)


def test_strip_field_midgap_vs_mpmath():
    assert abs(geo.strip_field(REF, W5, 0.0)) == pytest.approx(B_MIDGAP, rel=1e-10)


def test_strip_field_singular_at_edges():
    for x in (REF.b, -REF.b, REF.S, -REF.S):
        with pytest.raises(SingularityError):
            geo.strip_field(REF, W5, x)


def test_field_integral_reference_value():
    assert geo.field_integral(REF, W5) == pytest.approx(FIELD_INTEGRAL_REF, rel=1e-8)


def test_field_integral_vs_riemann_1e7():
    q = geo.field_integral(REF, W5)
    r = geo.field_integral_riemann(REF, W5, n=10_000_000)
    assert r == pytest.approx(q, rel=1e-4)


def test_field_integral_closed_form():
    b, S, d = REF.b, REF.S, REF.delta_cut
    assert geo.inverse_product_integral(b, S, d) == pytest.approx(
        geo.inverse_product_integral_closed(b, S, d), rel=1e-10)


def test_field_integral_scales_as_omega_squared():
    a = geo.field_integral(REF, W5)
    assert geo.field_integral(REF, 3 * W5) == pytest.approx(9 * a, rel=1e-12)


def test_halving_cutoff_adds_log_increment():
    g1 = REF
    g2 = replace(REF, delta_cut=REF.delta_cut / 2)
    b, S = REF.b, REF.S
    pref2 = geo.field_integral(g1, W5) / geo.inverse_product_integral(b, S, g1.delta_cut)
    # near an edge a the integrand is c_a / |x - a|; both sides of all four
    # edges gain c_a ln 2 when the cut is halved
    c_b = 1 / (2 * b * (S**2 - b**2))
    c_S = 1 / (2 * S * (S**2 - b**2))
    predicted = pref2 * 4 * math.log(2) * (c_b + c_S)
    got = geo.field_integral(g2, W5) - geo.field_integral(g1, W5)
    assert got == pytest.approx(predicted, rel=0.05)


def test_alpha_reference_value_and_scalings():
    a = geo.alpha(REF)
    assert a == pytest.approx(ALPHA_REF, rel=1e-9)
    assert geo.alpha(replace(REF, Z=200.0)) == pytest.approx(a / 2, rel=1e-12)
    for lam in (0.1, 0.5, 3.0):
        assert geo.alpha(REF.scaled(lam)) == pytest.approx(a / lam, rel=1e-9)


def test_alpha_plausible_bracket():
    g = StripGeometry(b=0.4e-6, w=0.4e-6, L_res=2e-3, delta_cut=50e-9)
    assert 0.05 <= geo.alpha(g) <= 1.0


@pytest.mark.parametrize("seed", range(5))
def test_random_geometries_against_mpmath(seed):
    rng = np.random.default_rng(seed)
    b = rng.uniform(0.5e-6, 10e-6)
    w = rng.uniform(0.5e-6, 10e-6)
    delta = min(b, w) * rng.uniform(0.01, 0.2)
    g = StripGeometry(b=b, w=w, L_res=1e-3, delta_cut=delta)
    _, fi, al = strip_oracles(b, w, delta=delta)
    assert geo.field_integral(g, W5) == pytest.approx(fi, rel=1e-4)
    assert geo.alpha(g) == pytest.approx(al, rel=1e-4)


def test_reference_oracles_agree_with_frozen():
    mid, fi, al = strip_oracles(REF.b, REF.w)
    assert mid == pytest.approx(B_MIDGAP, rel=1e-12)
    assert fi == pytest.approx(FIELD_INTEGRAL_REF, rel=1e-12)
    assert al == pytest.approx(ALPHA_REF, rel=1e-12)


def test_geometry_validation():
    with pytest.raises(DomainError):
        StripGeometry(b=-1e-6, w=1e-6, L_res=1e-3)
    with pytest.raises(DomainError):
        StripGeometry(b=1e-6, w=1e-6, L_res=1e-3, delta_cut=2e-6)
    with pytest.raises(DomainError):
        StripGeometry(b=1e-6, w=1e-6, L_res=0.0)
    assert REF.S == REF.b + REF.w


def test_polarization():
    assert geo.polarization(W5, 0.3) == pytest.approx(0.380, abs=1e-3)
    assert geo.polarization(W5, 1e-4) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        geo.polarization(W5, 0.0)


@given(st.floats(1e4, 1e8), st.floats(0.005, 2.0))
def test_density_round_trip(Om_hz, T):
    Om = 2 * math.pi * Om_hz
    n = geo.spin_density(Om, T, REF, W5)
    assert geo.coupling_from_density(n, T, REF, W5) == pytest.approx(Om, rel=1e-9)


def test_density_temperature_ratio():
    Om = 2 * math.pi * 1e6
    r = geo.spin_density(Om, 0.3, REF, W5) / geo.spin_density(Om, 0.01, REF, W5)
    assert r == pytest.approx(geo.polarization(W5, 0.01) / geo.polarization(W5, 0.3), rel=1e-12)
    assert r == pytest.approx(2.63, abs=0.01)
    with pytest.raises(DomainError):
        geo.spin_density(Om, 0.0, REF, W5)


def test_density_breakdown_sums_and_order_of_magnitude():
    Om = 2 * math.pi * 0.95e6
    res = geo.density_breakdown({"central": Om, "satlow": Om * math.sqrt(0.775),
                                 "sathigh": Om * math.sqrt(0.424)}, 0.01, REF, W5)
    assert res.n == pytest.approx(res.n_central + res.n_satLow + res.n_satHigh, rel=1e-14)
    assert min(res.n_central, res.n_satLow, res.n_satHigh) >= 0
    assert 2.2e17 / 3 <= res.n <= 3 * 2.2e17


def test_cutoff_sensitivity_matches_difference():
    Om = 2 * math.pi * 1e6
    s = geo.density_cutoff_sensitivity(Om, 0.01, REF, W5)
    d = 5e-9
    fd = (geo.spin_density(Om, 0.01, replace(REF, delta_cut=REF.delta_cut + d), W5)
          - geo.spin_density(Om, 0.01, replace(REF, delta_cut=REF.delta_cut - d), W5)) / (2 * d)
    assert s > 0
    assert s == pytest.approx(fd, rel=1e-3)
