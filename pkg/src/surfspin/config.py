"""Run configuration for the command-line tool.

A TOML file with a fixed set of tables.  Unknown tables or keys are errors, and
every value is validated before any computation starts.  Without ``--config``
the tool looks for ``surfspin.toml`` in each directory listed in
``SURFSPIN_CONFIG_PATH`` (``os.pathsep`` separated), then in the working
directory.
"""

from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
import os

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import InputError
from .geometry import REFERENCE_GEOMETRY, StripGeometry

ENV_PATH = "SURFSPIN_CONFIG_PATH"
FILE_NAME = "surfspin.toml"


@dataclass
class FitOptions:
    robust: bool = True
    use_shift: bool = True
    max_iter: int = 200
    f_scale: float = 2.0
    fit_background: bool = True


@dataclass
class SpinPriors:
    A: float = 1423e6
    g_e: float = 2.0
    g_n: float = 5.5856946893
    include_nuclear_zeeman: bool = True
    D: float = 0.0


@dataclass
class Config:
    geometry: StripGeometry = REFERENCE_GEOMETRY
    constants: dict = field(default_factory=dict)
    fit: FitOptions = field(default_factory=FitOptions)
    spin: SpinPriors = field(default_factory=SpinPriors)
    sweep: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    seed: int = 0
    source: str = None

    def canonical(self):
        d = {
            "geometry": asdict(self.geometry),
            "constants": dict(sorted(self.constants.items())),
            "fit": asdict(self.fit),
            "spin": asdict(self.spin),
            "sweep": self.sweep,
            "paths": dict(sorted(self.paths.items())),
            "seed": self.seed,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_SCHEMA = {
    "geometry": {"b": float, "w": float, "L_res": float, "delta_cut": float, "Z": float},
    "constants": {"h": float, "mu_B": float, "mu_N": float, "k_B": float, "mu_0": float},
    "fit": {"robust": bool, "use_shift": bool, "max_iter": int, "f_scale": float,
            "fit_background": bool},
    "spin": {"A": float, "g_e": float, "g_n": float, "include_nuclear_zeeman": bool, "D": float},
    "sweep": {"f0": float, "peaks": list, "background": dict},
    "paths": {"out_dir": str},
}
_PEAK_KEYS = {"label", "spin", "g_e", "A", "D", "include_nuclear_zeeman", "line", "B_peak",
              "Omega_hz", "gamma2_hz", "Delta_hz"}
_BG_KEYS = {"c", "B_on", "sigma_on"}


def _typed(table, key, value, typ):
    where = f"[{table}] {key}"
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InputError(f"{where} must be a number")
        if not math.isfinite(value):
            raise InputError(f"{where} must be finite")
        return float(value)
    if typ is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise InputError(f"{where} must be an integer")
    if typ is not int and not isinstance(value, typ):
        raise InputError(f"{where} must be of type {typ.__name__}")
    return value


def from_mapping(raw, source=None):
    unknown = set(raw) - set(_SCHEMA) - {"seed"}
    if unknown:
        raise InputError(f"unknown configuration keys: {sorted(unknown)}")
    tables = {}
    for name, schema in _SCHEMA.items():
        t = raw.get(name, {})
        if not isinstance(t, dict):
            raise InputError(f"[{name}] must be a table")
        bad = set(t) - set(schema)
        if bad:
            raise InputError(f"unknown keys in [{name}]: {sorted(bad)}")
        tables[name] = {k: _typed(name, k, v, schema[k]) for k, v in t.items()}
    for p in tables["sweep"].get("peaks", []):
        if not isinstance(p, dict) or "label" not in p:
            raise InputError("[sweep] peaks entries need a label")
        bad = set(p) - _PEAK_KEYS
        if bad:
            raise InputError(f"unknown keys in sweep peak {p['label']!r}: {sorted(bad)}")
    bad = set(tables["sweep"].get("background", {})) - _BG_KEYS
    if bad:
        raise InputError(f"unknown keys in [sweep] background: {sorted(bad)}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise InputError("seed must be a non-negative integer")
    try:
        geom = StripGeometry(**{**asdict(REFERENCE_GEOMETRY), **tables["geometry"]})
        fit = FitOptions(**tables["fit"])
        spin = SpinPriors(**tables["spin"])
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid configuration: {exc}") from None
    if fit.max_iter < 1 or fit.f_scale <= 0:
        raise InputError("[fit] max_iter and f_scale must be positive")
    if spin.g_e <= 0 or spin.A < 0:
        raise InputError("[spin] needs g_e > 0 and A >= 0")
    for k, v in tables["constants"].items():
        if not v > 0:
            raise InputError(f"[constants] {k} must be positive")
    return Config(geom, tables["constants"], fit, spin, tables["sweep"], tables["paths"],
                  seed, source)


def load(path=None):
    """Load an explicit file, else the first one on the search path, else defaults."""
    if path is None:
        dirs = [d for d in os.environ.get(ENV_PATH, "").split(os.pathsep) if d] + [os.getcwd()]
        for d in dirs:
            cand = os.path.join(d, FILE_NAME)
            if os.path.isfile(cand):
                path = cand
                break
    if path is None:
        return Config()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read configuration {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    return from_mapping(raw, os.path.basename(path))


def load_geometry(path):
    """A StripGeometry from a TOML file holding either ``[geometry]`` or bare keys."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read geometry {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    table = raw.get("geometry", raw)
    return from_mapping({"geometry": table}).geometry
