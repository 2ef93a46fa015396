"""CSV ingestion and emission for every dataset type.

Files carry a mandatory header row of unit-suffixed column names.  Optional
``# key=value`` lines before the header hold scalar metadata (the resonator
Q values of a saturation curve, for instance).  Numbers are written with
``repr`` so a dataset survives a write/read cycle bit for bit.
"""

import csv
import io as _io
import os
import tempfile

import numpy as np

from .datasets import (AngleSeries, PeakPositions, S21Trace, SaturationCurve, SweepTrace,
                       TemperatureSeries)
from .errors import InputError

SCHEMAS = {
    "sweep": ("B_tesla", "f_hz", "q_inv"),
    "s21": ("f_hz", "s21_re", "s21_im"),
    "saturation": ("p_watt", "q_inv"),
    "temperature": ("t_kelvin",),
    "angle": ("theta_deg", "g"),
    "peak_positions": ("f_hz", "B_tesla", "label"),
}
# axes that must be strictly monotone, per kind
_AXIS = {"sweep": "B_tesla", "s21": "f_hz", "saturation": "p_watt", "temperature": "t_kelvin"}


def detect_kind(header):
    cols = set(header)
    if "label" in cols:
        return "peak_positions"
    if "t_kelvin" in cols:
        return "temperature"
    for kind in ("sweep", "s21", "saturation", "angle"):
        if set(SCHEMAS[kind]) <= cols:
            return kind
    raise InputError(f"header {list(header)} matches no known dataset")


def parse_csv(text, kind=None):
    """Parse CSV text into ``(kind, columns, meta)``; errors name the file line."""
    meta = {}
    header = None
    header_line = 0
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None and "=" in line:
                k, v = line[1:].split("=", 1)
                try:
                    meta[k.strip()] = float(v)
                except ValueError:
                    raise InputError(f"metadata value {v.strip()!r} is not a number", lineno) from None
            continue
        fields = next(csv.reader([line]))
        fields = [f.strip() for f in fields]
        if header is None:
            header, header_line = fields, lineno
            if len(set(header)) != len(header):
                raise InputError("duplicate column names", lineno)
            continue
        if len(fields) != len(header):
            raise InputError(f"expected {len(header)} fields, found {len(fields)}", lineno)
        rows.append((lineno, fields))
    if header is None:
        raise InputError("missing header row", 1)
    kind = kind or detect_kind(header)
    if kind not in SCHEMAS:
        raise InputError(f"unknown dataset kind {kind!r}")
    missing = [c for c in SCHEMAS[kind] if c not in header]
    if missing:
        raise InputError(f"missing columns {missing} for {kind} data", header_line)
    if not rows:
        raise InputError("no data rows", header_line)
    cols = {}
    for j, name in enumerate(header):
        if name == "label":
            cols[name] = [f[j].lower() for _, f in rows]
            continue
        vals = np.empty(len(rows))
        for i, (lineno, f) in enumerate(rows):
            try:
                vals[i] = float(f[j])
            except ValueError:
                raise InputError(f"column {name}: {f[j]!r} is not a number", lineno) from None
            if not np.isfinite(vals[i]):
                raise InputError(f"column {name}: non-finite value", lineno)
        cols[name] = vals
    axis = _AXIS.get(kind)
    if axis is not None and len(rows) > 1:
        d = np.diff(cols[axis])
        sign = 1.0 if d[0] > 0 else -1.0
        strict = kind in ("sweep", "s21")
        bad = np.flatnonzero(sign * d <= 0) if strict else np.flatnonzero(d <= 0)
        if bad.size:
            raise InputError(f"column {axis} is not monotone at this row", rows[bad[0] + 1][0])
    return kind, cols, meta


def dataset_from_columns(kind, cols, meta):
    if kind == "sweep":
        return SweepTrace(cols["B_tesla"], cols["f_hz"], cols["q_inv"], meta.get("B_ref"))
    if kind == "s21":
        return S21Trace(cols["f_hz"], cols["s21_re"], cols["s21_im"])
    if kind == "saturation":
        if "Q" not in meta or "Q_ext" not in meta:
            raise InputError("saturation files need '# Q=' and '# Q_ext=' metadata lines", 1)
        return SaturationCurve(cols["p_watt"], cols["q_inv"], meta["Q"], meta["Q_ext"])
    if kind == "temperature":
        areas = {k[5:]: v for k, v in cols.items() if k.startswith("area_")}
        errs = {k[4:]: v for k, v in cols.items() if k.startswith("err_")}
        if not areas:
            raise InputError("temperature files need at least one area_<label> column", 1)
        return TemperatureSeries(cols["t_kelvin"], areas, errs)
    if kind == "angle":
        return AngleSeries(cols["theta_deg"], cols["g"])
    return PeakPositions(cols["f_hz"], cols["B_tesla"], tuple(cols["label"]))


def read_dataset(path, kind=None):
    """Load any dataset CSV; raises InputError with a line number on bad input."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    kind, cols, meta = parse_csv(text, kind)
    return kind, dataset_from_columns(kind, cols, meta)


def _columns(ds):
    """``(kind, header, columns, meta)`` for a dataset object."""
    if isinstance(ds, SweepTrace):
        return "sweep", ["B_tesla", "f_hz", "q_inv"], [ds.B, ds.f0, ds.Q_inv], {}
    if isinstance(ds, S21Trace):
        return "s21", ["f_hz", "s21_re", "s21_im"], [ds.f, ds.re, ds.im], {}
    if isinstance(ds, SaturationCurve):
        return "saturation", ["p_watt", "q_inv"], [ds.P_drive, ds.Qs_inv], {"Q": ds.Q, "Q_ext": ds.Q_ext}
    if isinstance(ds, TemperatureSeries):
        head, cols = ["t_kelvin"], [ds.T]
        for k in ds.areas:
            head.append(f"area_{k}")
            cols.append(ds.areas[k])
        for k in ds.errors:
            head.append(f"err_{k}")
            cols.append(ds.errors[k])
        return "temperature", head, cols, {}
    if isinstance(ds, AngleSeries):
        return "angle", ["theta_deg", "g"], [ds.theta_deg, ds.g], {}
    if isinstance(ds, PeakPositions):
        return "peak_positions", ["f_hz", "B_tesla", "label"], [ds.f_res, ds.B_peak, list(ds.labels)], {}
    raise InputError(f"cannot serialise {type(ds).__name__}")


def _fmt(x):
    return x if isinstance(x, str) else repr(float(x))


def table_text(header, columns, meta=None):
    buf = _io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def dataset_text(ds):
    _, head, cols, meta = _columns(ds)
    return table_text(head, cols, meta)


def atomic_write(path, data):
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_dataset(path, ds):
    atomic_write(path, dataset_text(ds))
