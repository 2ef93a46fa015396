"""Batch command-line front end.

Every subcommand reads CSV (or TOML/JSON) inputs, writes JSON results plus
optional CSV tables and SVG plots, and exits with 0 on success, 2 on bad
input, 3 when a fit did not converge (results are still written) and 64 on a
usage error.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import copy
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import config as cfgmod
from . import constants as C
from . import geometry as geo
from . import io as sio
from . import synth
from .errors import DomainError, FitError, InputError, NumericError
from .fitting import (derive_t1, fit_angle, fit_peak_positions, fit_resonance, fit_saturation,
                      fit_sweep, fit_temperature, decompose)
from .fitting.lm import _jsonable
from .spin_levels import (SpinSystem, crossings_many, eigensystem, labelled_lines,
                          line_frequency, line_strength)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 2, 3, 64
TWO_PI = 2 * math.pi


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# output helpers

def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def envelope(cfg, command, inp, body):
    return {"tool": "surfspin", "version": __version__, "config_hash": cfg.hash,
            "command": command, "input": os.path.basename(inp) if inp else None, **body}


def out_path(args, cfg, name):
    d = args.out_dir or cfg.paths.get("out_dir") or "."
    return os.path.join(d, name)


def stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def write_json(path, obj):
    sio.atomic_write(path, dumps(obj))
    return path


def try_plot(path, draw, provenance):
    """Render an SVG; failures are reported but never change the exit code."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        matplotlib.rcParams["svg.hashsalt"] = "surfspin"
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax)
        fig.tight_layout()
        tmp = path + ".part"
        fig.savefig(tmp, format="svg", metadata={
            "Title": provenance.get("command", "surfspin"),
            "Creator": f"surfspin {__version__}",
            "Description": json.dumps(provenance, sort_keys=True),
            "Date": None})
        plt.close(fig)
        os.replace(tmp, path)
        return path
    except Exception as exc:  # plotting must never gate the exit code
        print(f"warning: plot {os.path.basename(path)} not written: {exc}", file=sys.stderr)
        return None


def fit_body(res):
    d = res.to_dict()
    return {"fit": d}


# ---------------------------------------------------------------------------
# per-file fit jobs; each returns (exit_code, [written paths])

def _job_resonance(args, cfg, path):
    _, tr = sio.read_dataset(path, "s21")
    res = fit_resonance(tr.f, tr.s21)
    prov = envelope(cfg, "fit-resonance", path, {})
    out = [write_json(out_path(args, cfg, f"{stem(path)}.fit-resonance.json"),
                      envelope(cfg, "fit-resonance", path, fit_body(res)))]
    if args.plot:
        from .fitting.resonance import _model
        p = [res.params[k] for k in ("f0", "Q", "Qc_abs", "Qc_arg", "a", "phi")]

        def draw(ax):
            z, m = tr.s21, _model(p, tr.f)
            ax.plot(z.real, z.imag, ".", ms=1, label="data")
            ax.plot(m.real, m.imag, "-", label="fit")
            ax.set_xlabel("Re S21")
            ax.set_ylabel("Im S21")
            ax.set_aspect("equal")
            ax.legend()
        out.append(try_plot(out_path(args, cfg, f"{stem(path)}.fit-resonance.svg"), draw, prov))
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), out


def sweep_template(cfg, trace, f0=None):
    sw = copy.deepcopy(cfg.sweep)
    f0 = f0 or sw.get("f0") or float(trace.f0[trace.ref_index])
    peaks = sw.get("peaks")
    if not peaks:
        sp = cfg.spin
        hyd = dict(spin="hydrogen", g_e=sp.g_e, A=sp.A,
                   include_nuclear_zeeman=sp.include_nuclear_zeeman)
        peaks = [dict(label="central", spin="free", g_e=sp.g_e),
                 dict(label="satlow", **hyd), dict(label="sathigh", **hyd)]
    for p in peaks:
        p.setdefault("Omega_hz", 0.5e6)
        p.setdefault("gamma2_hz", 50e6)
        p.setdefault("Delta_hz", 50e6 if p["label"] in ("satlow", "sathigh") else 0.0)
    qb = trace.Qb_inv
    bg = dict(c=max(float(np.percentile(qb, 25)), 1e-3 * float(np.max(np.abs(qb)))),
              B_on=0.05, sigma_on=0.01)
    bg.update(sw.get("background", {}))
    tp = dict(f0=f0, Q=1e5, B_max=float(np.max(np.abs(trace.B))), peaks=peaks, background=bg)
    return synth.sweep_model(tp)


def _job_sweep(args, cfg, path):
    _, tr = sio.read_dataset(path, "sweep")
    tmpl = sweep_template(cfg, tr, args.f0)
    robust = cfg.fit.robust if args.robust is None else args.robust
    res = fit_sweep(tr, tmpl, robust=robust, use_shift=cfg.fit.use_shift,
                    fit_background=cfg.fit.fit_background, f_scale=cfg.fit.f_scale,
                    max_iter=cfg.fit.max_iter)
    s = stem(path)
    body = fit_body(res)
    body["f0_hz"] = tmpl.resonator.f0
    out = [write_json(out_path(args, cfg, f"{s}.fit-sweep.json"), envelope(cfg, "fit-sweep", path, body))]
    mdl = res.model
    slopes = [p.slope() for p in mdl.peaks]
    comps = decompose(mdl, tr.B, slopes)
    ref = decompose(mdl, np.array([tr.B_ref]), slopes)
    comps = {k: v - ref[k][0] for k, v in comps.items()}
    total = sum(comps.values())
    head = ["B_tesla", "qb_data", "qb_model", "residual"] + [f"qb_{k}" for k in comps]
    cols = [tr.B, tr.Qb_inv, total, tr.Qb_inv - total] + list(comps.values())
    csv_path = out_path(args, cfg, f"{s}.decomposition.csv")
    sio.atomic_write(csv_path, sio.table_text(head, cols))
    out.append(csv_path)
    if args.plot:
        def draw(ax):
            ax.plot(tr.B * 1e3, tr.Qb_inv, ".", ms=1.5, color="tab:red", label="data")
            ax.plot(tr.B * 1e3, total, "k-", lw=1, label="fit")
            for k, v in comps.items():
                ax.plot(tr.B * 1e3, v, "--", lw=0.8, label=k)
            ax.set_xlabel("B (mT)")
            ax.set_ylabel("Qb^-1")
            ax.legend(fontsize=7)
        out.append(try_plot(out_path(args, cfg, f"{s}.fit-sweep.svg"), draw,
                            envelope(cfg, "fit-sweep", path, {})))
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), out


def _job_levels_fit(args, cfg, path):
    _, data = sio.read_dataset(path, "peak_positions")
    res = fit_peak_positions(data, g0=cfg.spin.g_e, A0=cfg.spin.A,
                             include_nuclear_zeeman=cfg.spin.include_nuclear_zeeman)
    out = [write_json(out_path(args, cfg, f"{stem(path)}.fit-levels.json"),
                      envelope(cfg, "fit-levels", path, fit_body(res)))]
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), out


def peak_fields(cfg, f0):
    sp = cfg.spin
    H = SpinSystem.hydrogen(A=sp.A, g_e=sp.g_e, g_n=sp.g_n,
                            include_nuclear_zeeman=sp.include_nuclear_zeeman)
    B_max = 2 * f0 * C.h / (C.mu_B * sp.g_e) + 0.5
    out = {}
    for spin in (SpinSystem.free(sp.g_e), H):
        for b, l in crossings_many(spin, [f0], B_max)[0]:
            out.setdefault(l.value, b)
    return out


def _job_temperature(args, cfg, path):
    _, ts = sio.read_dataset(path, "temperature")
    sp = cfg.spin
    hyps = {"doublet": SpinSystem.free(sp.g_e), "triplet": SpinSystem.triplet(sp.g_e, sp.D)}
    B_peaks = peak_fields(cfg, args.f0 or 5e9)
    sat = SpinSystem.hydrogen(A=sp.A, g_e=sp.g_e, g_n=sp.g_n,
                              include_nuclear_zeeman=sp.include_nuclear_zeeman)
    r = fit_temperature(ts, hyps, B_peaks, satellite_spin=sat)
    body = {
        "ranking": r["ranking"],
        "residual_ratio": r["residual_ratio"],
        "aicc": r["aicc"],
        "abundance": r["abundance"],
        "B_peaks": B_peaks,
        "hypotheses": {k: v.to_dict() for k, v in r["results"].items()},
        "satellites": {k: v.to_dict() for k, v in r["satellites"].items()},
    }
    conv = all(v.converged for v in list(r["results"].values()) + list(r["satellites"].values()))
    out = [write_json(out_path(args, cfg, f"{stem(path)}.fit-temperature.json"),
                      envelope(cfg, "fit-temperature", path, body))]
    return (EXIT_OK if conv else EXIT_NOT_CONVERGED), out


def _job_saturation(args, cfg, path):
    _, curve = sio.read_dataset(path, "saturation")
    res = fit_saturation(curve)
    if args.t2e:
        a = args.alpha or geo.alpha(cfg.geometry)
        res.derived["alpha"] = a
        res.derived["T1"] = derive_t1(res.params["P_sat"], args.t2e, a, cfg.spin.g_e)
    out = [write_json(out_path(args, cfg, f"{stem(path)}.fit-saturation.json"),
                      envelope(cfg, "fit-saturation", path, fit_body(res)))]
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), out


def _job_angle(args, cfg, path):
    _, series = sio.read_dataset(path, "angle")
    res = fit_angle(series)
    out = [write_json(out_path(args, cfg, f"{stem(path)}.fit-angle.json"),
                      envelope(cfg, "fit-angle", path, fit_body(res)))]
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), out


JOBS = {
    "fit-resonance": _job_resonance,
    "fit-sweep": _job_sweep,
    "fit-levels": _job_levels_fit,
    "fit-temperature": _job_temperature,
    "fit-saturation": _job_saturation,
    "fit-angle": _job_angle,
}


def _guarded(job, args, cfg, path):
    try:
        return job(args, cfg, path)
    except InputError as exc:
        return EXIT_INPUT, f"{path}: {exc}"
    except DomainError as exc:
        return EXIT_INPUT, f"{path}: {exc}"
    except (FitError, NumericError) as exc:
        # partial result: the failure itself is the recorded outcome
        cmd = args.command
        body = {"error": f"{type(exc).__name__}: {exc}", "fit": None}
        write_json(out_path(args, cfg, f"{stem(path)}.{cmd}.json"), envelope(cfg, cmd, path, body))
        return EXIT_NOT_CONVERGED, f"{path}: {exc}"


def run_files(args, cfg):
    job = JOBS[args.command]
    jobs = max(1, args.jobs or min(len(args.inputs), os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda p: _guarded(job, args, cfg, p), args.inputs))
    code = EXIT_OK
    for path, (rc, info) in zip(args.inputs, results):
        if isinstance(info, str):
            print(f"error: {info}", file=sys.stderr)
        else:
            for p in info:
                if p:
                    print(p)
        code = max(code, rc)
    return code


# ---------------------------------------------------------------------------
# non-fit commands

def parse_range(text):
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise UsageError(f"field range {text!r} must be start:stop:count") from None
    if n < 1 or a < 0 or b < a:
        raise UsageError("field range needs 0 <= start <= stop and count >= 1")
    return np.linspace(a, b, n)


def make_cli_spin(args, cfg):
    sp = cfg.spin
    g = args.g if args.g is not None else sp.g_e
    if args.spin == "free":
        return SpinSystem.free(g)
    if args.spin == "triplet":
        return SpinSystem.triplet(g, args.D if args.D is not None else sp.D)
    A = args.A if args.A is not None else sp.A
    return SpinSystem.hydrogen(A=A, g_e=g, g_n=sp.g_n, include_nuclear_zeeman=sp.include_nuclear_zeeman)


def cmd_levels(args, cfg):
    spin = make_cli_spin(args, cfg)
    B = parse_range(args.B)
    E = np.array([eigensystem(spin, float(b)).energies for b in B])
    head = ["B_tesla"] + [f"E{i}_hz" for i in range(E.shape[1])]
    cols = [B] + [E[:, i] for i in range(E.shape[1])]
    seen = {}
    for key, label in labelled_lines(spin).items():
        n = seen[label.value] = seen.get(label.value, 0) + 1
        name = label.value if n == 1 else f"{label.value}{n}"
        head += [f"f_{name}_hz", f"strength_{name}"]
        cols += [line_frequency(spin, key, B), line_strength(spin, key, B)]
    path = args.output or out_path(args, cfg, f"levels_{args.spin}.csv")
    sio.atomic_write(path, sio.table_text(head, cols))
    print(path)
    return EXIT_OK


def _omegas(args):
    """Collective couplings (rad/s) from ``--omega`` and ``--from-fit``."""
    om = {}
    for item in args.omega or []:
        label, _, val = item.rpartition("=")
        label = label or "central"
        if label not in ("central", "satlow", "sathigh"):
            raise UsageError(f"unknown peak label {label!r}")
        try:
            om[label] = TWO_PI * float(val)
        except ValueError:
            raise UsageError(f"--omega value {val!r} is not a number") from None
    if args.from_fit:
        try:
            with open(args.from_fit, encoding="utf-8") as fh:
                d = json.load(fh)
            params = d["fit"]["params"]
        except (OSError, ValueError, KeyError, TypeError):
            raise InputError(f"{args.from_fit} is not a fit-sweep result") from None
        for k, v in params.items():
            lab, _, name = k.partition(".")
            if name == "Omega" and lab in ("central", "satlow", "sathigh"):
                om.setdefault(lab, float(v))
        if args.f0 is None and "f0_hz" in d:
            args.f0 = float(d["f0_hz"])
    if not om:
        raise UsageError("give at least one --omega or --from-fit")
    return om


def cmd_spin_density(args, cfg):
    g = cfgmod.load_geometry(args.geometry) if args.geometry else cfg.geometry
    om = _omegas(args)
    omega0 = TWO_PI * (args.f0 or 5e9)
    dens = geo.density_breakdown(om, args.T, g, omega0)
    sens = {k: geo.density_cutoff_sensitivity(v, args.T, g, omega0) for k, v in om.items()}
    body = {
        "geometry": g.__dict__,
        "f0_hz": omega0 / TWO_PI,
        "T_kelvin": args.T,
        "Omega_rad_s": om,
        "n_per_m2": dens.n,
        "n_breakdown": {"central": dens.n_central, "satlow": dens.n_satLow, "sathigh": dens.n_satHigh},
        "ratio_H_e": dens.ratio_H_e,
        "dn_ddelta_per_m3": sum(sens.values()),
        "dn_ddelta_breakdown": sens,
        "polarization": geo.polarization(omega0, args.T),
        "alpha_T_per_sqrtW": geo.alpha(g),
    }
    path = args.output or out_path(args, cfg, "spin-density.json")
    write_json(path, envelope(cfg, "spin-density", None, body))
    print(f"n = {dens.n:.4g} m^-2   dn/ddelta = {body['dn_ddelta_per_m3']:.4g} m^-3")
    print(path)
    return EXIT_OK


def load_scenario(args, cfg):
    if args.scenario in (None, "three-peak"):
        sc = synth.three_peak_scenario()
        d = sc.to_dict()
    else:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read scenario {args.scenario}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(f"{args.scenario}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise InputError("scenario must be a JSON object")
    if args.seed is not None:
        d = {**d, "seed": args.seed}
    return synth.Scenario.from_dict(d)


def cmd_simulate(args, cfg):
    sc = load_scenario(args, cfg)
    data, man = synth.synthesize(sc)
    path = args.output or out_path(args, cfg, "out.csv")
    sio.write_dataset(path, data)
    man_path = os.path.splitext(path)[0] + ".manifest.json"
    write_json(man_path, envelope(cfg, "simulate", None, {"manifest": man}))
    print(path)
    print(man_path)
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, dict) and set(v) == {"re", "im"}:
        return f"{_fmt(v['re'])}{'+' if not str(_fmt(v['im'])).startswith('-') else ''}{_fmt(v['im'])}j"
    return str(v)


def render_report(docs):
    lines = ["# surfspin report", ""]
    for name, d in docs:
        lines += [f"## {name}", "",
                  f"- command: {d.get('command')}",
                  f"- input: {d.get('input')}",
                  f"- tool version: {d.get('version')}",
                  f"- config hash: {d.get('config_hash')}", ""]
        fit = d.get("fit")
        if d.get("error"):
            lines += [f"error: {d['error']}", ""]
        if fit:
            lines += [f"converged: {fit['converged']}, iterations: {fit['n_iter']}, "
                      f"residual norm: {_fmt(fit['residual_norm'])}", "",
                      "| parameter | value | ci95 low | ci95 high |", "|---|---|---|---|"]
            for k in fit["params"]:
                lo, hi = fit["ci95"][k]
                lines.append(f"| {k} | {_fmt(fit['params'][k])} | {_fmt(lo)} | {_fmt(hi)} |")
            lines.append("")
            if fit.get("flags"):
                lines += ["flags: " + ", ".join(fit["flags"]), ""]
            if fit.get("derived"):
                lines += ["| derived | value |", "|---|---|"]
                for k in sorted(fit["derived"]):
                    lines.append(f"| {k} | {_fmt(fit['derived'][k])} |")
                lines.append("")
        for key in ("ranking", "abundance", "n_per_m2", "dn_ddelta_per_m3"):
            if key in d:
                lines += [f"{key}: {_fmt(d[key])}", ""]
        if "manifest" in d:
            lines += [f"scenario: {d['manifest']['scenario']['kind']}, seed "
                      f"{d['manifest']['scenario']['seed']}, rng {d['manifest']['rng']}", ""]
    return "\n".join(lines).rstrip("\n") + "\n"


def cmd_report(args, cfg):
    docs = []
    for p in args.inputs:
        try:
            with open(p, encoding="utf-8") as fh:
                docs.append((os.path.basename(p), json.load(fh)))
        except OSError as exc:
            raise InputError(f"cannot read {p}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(f"{p}: invalid JSON ({exc})") from None
    path = args.output or out_path(args, cfg, "report.md")
    sio.atomic_write(path, render_report(docs))
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    common = Parser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out-dir", help="directory for output files")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("--jobs", type=int, help="files processed concurrently")

    p = Parser(prog="surfspin", description="Surface spin ESR analysis")
    p.add_argument("--version", action="version", version=f"surfspin {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    for name, help_ in (("fit-resonance", "fit S21 traces"), ("fit-sweep", "fit field sweeps"),
                        ("fit-levels", "joint fit of peak positions"),
                        ("fit-temperature", "peak areas versus temperature"),
                        ("fit-saturation", "power saturation curves"),
                        ("fit-angle", "apparent g versus field angle")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("inputs", nargs="+", help="CSV files")
        if name in ("fit-sweep", "fit-temperature"):
            s.add_argument("--f0", type=float, help="resonator frequency, Hz")
        if name == "fit-sweep":
            g = s.add_mutually_exclusive_group()
            g.add_argument("--robust", dest="robust", action="store_true", default=None)
            g.add_argument("--no-robust", dest="robust", action="store_false")
        if name == "fit-saturation":
            s.add_argument("--t2e", type=float, help="T2e (s) for the T1 estimate")
            s.add_argument("--alpha", type=float, help="alpha (T/sqrt(W)); default from geometry")

    s = sub.add_parser("spin-density", parents=[common], help="spin density from couplings")
    s.add_argument("--omega", action="append", metavar="[LABEL=]HZ",
                   help="collective coupling Omega/2pi in Hz")
    s.add_argument("--from-fit", help="fit-sweep JSON providing the couplings")
    s.add_argument("--geometry", help="TOML file with the strip geometry")
    s.add_argument("--T", type=float, default=0.01, help="temperature, K")
    s.add_argument("--f0", type=float, help="resonator frequency, Hz (default 5e9)")
    s.add_argument("-o", "--output")

    s = sub.add_parser("levels", parents=[common], help="energy levels and lines vs field")
    s.add_argument("--spin", choices=("free", "hydrogen", "triplet"), default="hydrogen")
    s.add_argument("--B", required=True, help="start:stop:count in tesla")
    s.add_argument("--A", type=float, help="hyperfine constant, Hz")
    s.add_argument("--g", type=float, help="electron g-factor")
    s.add_argument("--D", type=float, help="zero-field splitting, Hz")
    s.add_argument("-o", "--output")

    s = sub.add_parser("simulate", parents=[common], help="synthetic datasets")
    s.add_argument("--scenario", help="scenario JSON file, or 'three-peak' (default)")
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output")

    s = sub.add_parser("report", parents=[common], help="markdown report from result JSON")
    s.add_argument("inputs", nargs="+")
    s.add_argument("-o", "--output")
    return p


COMMANDS = {"levels": cmd_levels, "spin-density": cmd_spin_density,
            "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        if cfg.constants:
            C.override(**cfg.constants)
        if args.command in JOBS:
            return run_files(args, cfg)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"surfspin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
