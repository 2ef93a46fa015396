"""Deterministic synthetic datasets built from the package's forward models.

Every scenario is a plain dict tree so it can live in a JSON file.  Rates in
``true_params`` are ordinary frequencies in Hz (``Omega_hz`` is Omega/2pi);
the manifest repeats them together with the resolved peak fields and the
random stream used.
"""

from dataclasses import dataclass, field
import copy
import enum
import math

import numpy as np

from . import constants as C
from . import lineshape as ls
from .datasets import (AngleSeries, PeakPositions, S21Trace, SaturationCurve, SweepTrace,
                       TemperatureSeries)
from .errors import InputError
from .fitting.saturation import saturation_model
from .fitting.angle import angle_model
from .spin_levels import Label, SpinSystem, crossings_many, transitions, peak_area_factor

RNG_ALGORITHM = "numpy.random.PCG64"
TWO_PI = 2 * math.pi


class Kind(str, enum.Enum):
    S21 = "s21"
    SWEEP = "sweep"
    SATURATION = "saturation"
    TEMPERATURE = "temperature"
    ANGLE = "angle"
    PEAK_POSITIONS = "peak_positions"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).lower().replace("-", "_")
        aliases = {"s21trace": "s21", "temperatureseries": "temperature",
                   "angleseries": "angle", "peakpositions": "peak_positions",
                   "sweeptrace": "sweep"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InputError(f"unknown scenario kind {s!r}") from None


DEFAULTS = {
    Kind.S21: dict(
        true_params=dict(f0=5e9, Q=1e5, Qc_abs=2e5, Qc_arg=0.1, a=1.0, phi=0.0,
                         span_linewidths=3.0, n_points=50001),
        noise=dict(snr_db=40.0)),
    Kind.SWEEP: dict(
        true_params=dict(
            f0=5e9, Q=1e5, B_min=0.0, B_max=0.3, n_points=3001,
            peaks=[
                dict(label="central", spin="free", g_e=2.0, Omega_hz=0.95e6,
                     gamma2_hz=87e6, Delta_hz=0.0),
                dict(label="satlow", spin="hydrogen", g_e=2.0, A=1423e6,
                     Omega_hz=0.95e6 * math.sqrt(0.775), gamma2_hz=87e6, Delta_hz=90e6),
                dict(label="sathigh", spin="hydrogen", g_e=2.0, A=1423e6,
                     Omega_hz=0.95e6 * math.sqrt(0.424), gamma2_hz=87e6, Delta_hz=90e6),
            ],
            background=dict(c=1e-6, B_on=0.05, sigma_on=0.01)),
        noise=dict(qb_rel=0.02, f_rel=0.02)),
    Kind.SATURATION: dict(
        true_params=dict(Qs0_inv=1e-6, P_sat=14e-9, epsilon=1.0, Q=2e4, Q_ext=4e4,
                         P0_min_ratio=1e-2, P0_max_ratio=1e2, n_points=25),
        noise=dict(rel=0.05)),
    Kind.TEMPERATURE: dict(
        true_params=dict(f0=5e9, spin="free", g_e=2.0, D=0.0, A=1423e6,
                         T=[0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
                         scales=dict(central=1.0, satlow=1.2, sathigh=1.2)),
        noise=dict(rel=0.02)),
    Kind.ANGLE: dict(
        true_params=dict(g_true=2.0, a=-2e-3, b=-1e-3,
                         theta_deg=[0, 10, 20, 30, 40, 50, 60, 70, 80, 90]),
        noise=dict(sigma=1e-4)),
    Kind.PEAK_POSITIONS: dict(
        true_params=dict(A=1423e6, g_H=2.0, g_central=2.0,
                         f_res=[2.5e9, 3.4e9, 4.4e9, 5.3e9, 6.2e9, 7.1e9, 8.1e9, 9.0e9]),
        noise=dict(B_sigma=1e-3)),
}


@dataclass
class Scenario:
    kind: Kind
    seed: int = 0
    true_params: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InputError("seed must be a non-negative integer")
        d = DEFAULTS[self.kind]
        tp = copy.deepcopy(d["true_params"])
        tp.update(copy.deepcopy(self.true_params or {}))
        nz = dict(d["noise"])
        nz.update(self.noise or {})
        for k, v in nz.items():
            if not (isinstance(v, (int, float)) and v >= 0):
                raise InputError(f"noise amplitude {k} must be >= 0")
        self.true_params, self.noise = tp, nz
        self.artifacts = dict(self.artifacts or {})
        if self.artifacts and self.kind is not Kind.SWEEP:
            raise InputError("artifacts are only defined for sweep scenarios")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "seed", "true_params", "noise", "artifacts"}
        if unknown:
            raise InputError(f"unknown scenario keys: {sorted(unknown)}")
        if "kind" not in d:
            raise InputError("scenario needs a kind")
        return cls(d["kind"], int(d.get("seed", 0)), d.get("true_params", {}),
                   d.get("noise", {}), d.get("artifacts", {}))

    def to_dict(self):
        return dict(kind=self.kind.value, seed=int(self.seed), true_params=self.true_params,
                    noise=self.noise, artifacts=self.artifacts)


def three_peak_scenario(seed=7, flux_jumps=5):
    """Three-peak sweep at figure scale with optional frequency spikes."""
    art = dict(flux_jumps=flux_jumps, amp_min=20e3, amp_max=100e3) if flux_jumps else {}
    return Scenario(Kind.SWEEP, seed, artifacts=art)


def make_spin(d):
    kind = d.get("spin", "free")
    g = d.get("g_e", 2.0)
    if kind == "free":
        return SpinSystem.free(g)
    if kind == "hydrogen":
        return SpinSystem.hydrogen(A=d.get("A", 1423e6), g_e=g,
                                   include_nuclear_zeeman=d.get("include_nuclear_zeeman", True))
    if kind == "triplet":
        return SpinSystem.triplet(g, d.get("D", 0.0))
    raise InputError(f"unknown spin kind {kind!r}")


def sweep_model(tp):
    """SpectrumModel of a sweep scenario; peak fields follow from the spins."""
    f0 = tp["f0"]
    peaks = []
    for d in tp["peaks"]:
        spin = make_spin(d)
        line = Label(d.get("line", d["label"] if d["label"] in ("satlow", "sathigh") else "central"))
        B_peak = d.get("B_peak")
        if B_peak is None:
            hits = [b for b, l in crossings_many(spin, [f0], 2 * tp["B_max"] + 1.0)[0] if l is line]
            if not hits:
                raise InputError(f"peak {d['label']} never crosses {f0} Hz")
            B_peak = hits[0]
        Delta = TWO_PI * d.get("Delta_hz", 0.0)
        peaks.append(ls.Peak(d["label"], B_peak, TWO_PI * d["Omega_hz"], TWO_PI * d["gamma2_hz"],
                             Delta, ls.Shape.VOIGT if Delta > 0 else ls.Shape.LORENTZIAN,
                             spin, line))
    bg = ls.Background(**tp.get("background", {}))
    return ls.SpectrumModel(ls.ResonatorParams.from_frequency(f0, tp["Q"]), peaks, bg)


def _sweep(sc, rng, man):
    tp = sc.true_params
    mdl = sweep_model(tp)
    B = np.linspace(tp["B_min"], tp["B_max"], int(tp["n_points"]))
    qb, df = ls.sweep_point(mdl, B)
    man["resolved"] = {p.label: dict(B_peak=p.B_peak, Omega=p.Omega, gamma2=p.gamma2, Delta=p.Delta)
                       for p in mdl.peaks}
    q = 1.0 / tp["Q"] + qb * (1.0 + sc.noise["qb_rel"] * rng.standard_normal(B.size))
    f = tp["f0"] + df + sc.noise["f_rel"] * float(np.max(np.abs(df))) * rng.standard_normal(B.size)
    n_jump = int(sc.artifacts.get("flux_jumps", 0))
    if n_jump:
        lo, hi = sc.artifacts.get("amp_min", 20e3), sc.artifacts.get("amp_max", 100e3)
        # never on the reference (first) row
        idx = np.sort(rng.choice(np.arange(1, B.size), n_jump, replace=False))
        amp = rng.uniform(lo, hi, n_jump) * rng.choice([-1.0, 1.0], n_jump)
        f[idx] += amp
        man["flux_jumps"] = dict(rows=idx.tolist(), amplitude_hz=amp.tolist())
    return SweepTrace(B, f, q)


def _s21(sc, rng, man):
    tp = sc.true_params
    f0, Q = tp["f0"], tp["Q"]
    half = tp["span_linewidths"] * f0 / Q
    f = np.linspace(f0 - half, f0 + half, int(tp["n_points"]))
    Qc = tp["Qc_abs"] * complex(math.cos(tp["Qc_arg"]), math.sin(tp["Qc_arg"]))
    z = tp["a"] * np.exp(1j * tp["phi"]) * ls.s21_bare(f, f0, Q, Qc)
    # SNR relative to the off-resonance level, split evenly over re and im
    snr = sc.noise["snr_db"]
    sigma = 0.0 if math.isinf(snr) else tp["a"] * 10 ** (-snr / 20) / math.sqrt(2)
    z = z + sigma * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    man["noise_sigma_per_component"] = sigma
    return S21Trace.from_complex(f, z)


def _saturation(sc, rng, man):
    tp = sc.true_params
    P0 = tp["P_sat"] * np.geomspace(tp["P0_min_ratio"], tp["P0_max_ratio"], int(tp["n_points"]))
    P_drive = P0 * tp["Q_ext"] / (2 * tp["Q"] ** 2)
    y = saturation_model(P0, tp["Qs0_inv"], tp["P_sat"], tp["epsilon"])
    y = y * (1.0 + sc.noise["rel"] * rng.standard_normal(P0.size))
    return SaturationCurve(P_drive, np.abs(y), tp["Q"], tp["Q_ext"])


def _temperature(sc, rng, man):
    tp = sc.true_params
    f0 = tp["f0"]
    T = np.asarray(tp["T"], dtype=float)
    central = make_spin(dict(spin=tp["spin"], g_e=tp["g_e"], D=tp["D"]))
    hyd = SpinSystem.hydrogen(A=tp["A"], g_e=tp["g_e"])
    areas, errs, B_peaks = {}, {}, {}
    for lab, scale in tp["scales"].items():
        spin = hyd if lab in ("satlow", "sathigh") else central
        hits = [b for b, l in crossings_many(spin, [f0], 2.0)[0] if l.value == lab]
        if not hits:
            raise InputError(f"no {lab} line at {f0} Hz")
        B = hits[0]
        t = [tr for tr in transitions(spin, B) if tr.label.value == lab][0]
        a = scale * np.array([peak_area_factor(spin, t, B, Ti) for Ti in T])
        e = sc.noise["rel"] * a
        areas[lab] = np.abs(a + e * rng.standard_normal(T.size))
        errs[lab] = e if sc.noise["rel"] > 0 else np.ones_like(a)
        B_peaks[lab] = B
    man["B_peaks"] = B_peaks
    return TemperatureSeries(T, areas, errs)


def _angle(sc, rng, man):
    tp = sc.true_params
    th = np.asarray(tp["theta_deg"], dtype=float)
    g = angle_model(th, tp["g_true"], tp["a"], tp["b"]) + sc.noise["sigma"] * rng.standard_normal(th.size)
    return AngleSeries(th, g)


def _peak_positions(sc, rng, man):
    tp = sc.true_params
    fr = np.asarray(tp["f_res"], dtype=float)
    H = SpinSystem.hydrogen(A=tp["A"], g_e=tp["g_H"])
    E = SpinSystem.free(tp["g_central"])
    B_max = 1.5 * float(np.max(fr)) * C.h / (C.mu_B * min(tp["g_H"], tp["g_central"])) + 0.2
    f, B, lab = [], [], []
    for spin in (H, E):
        for fi, hits in zip(fr, crossings_many(spin, fr, B_max)):
            seen = set()
            for b, l in hits:
                if l.value in seen:
                    continue
                seen.add(l.value)
                f.append(fi)
                B.append(b)
                lab.append(l.value)
    order = np.lexsort((lab, f))
    f, B, lab = np.array(f)[order], np.array(B)[order], [lab[i] for i in order]
    B = B + sc.noise["B_sigma"] * rng.standard_normal(B.size)
    return PeakPositions(f, B, tuple(lab))


_BUILDERS = {Kind.SWEEP: _sweep, Kind.S21: _s21, Kind.SATURATION: _saturation,
             Kind.TEMPERATURE: _temperature, Kind.ANGLE: _angle,
             Kind.PEAK_POSITIONS: _peak_positions}


def synthesize(sc):
    """Return ``(dataset, manifest)``; the same scenario always gives the same data."""
    if not isinstance(sc, Scenario):
        sc = Scenario.from_dict(sc)
    rng = np.random.Generator(np.random.PCG64(sc.seed))
    man = dict(scenario=sc.to_dict(), rng=RNG_ALGORITHM)
    data = _BUILDERS[sc.kind](sc, rng, man)
    return data, man
