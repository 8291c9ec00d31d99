"""Dataset CSV files and result tables (CSV or JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .model import Dataset

_INT_RE = re.compile(r"^[+-]?\d+$")


def read_dataset(source) -> Dataset:
    """Read a ``x1,...,xp,y`` CSV (header required, x1 all ones)."""
    text = _read_text(source)
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise InvalidInputError("dataset file is empty")
    header = [h.strip() for h in rows[0]]
    p = len(header) - 1
    expected = [f"x{j + 1}" for j in range(p)] + ["y"]
    if p < 1 or header != expected:
        raise InvalidInputError(f"dataset header must be {','.join(expected) if p >= 1 else 'x1,...,xp,y'}, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"non-numeric dataset entry: {exc}") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != p + 1:
        raise InvalidInputError("dataset rows must all have p + 1 fields and there must be at least one")
    return Dataset(data[:, :p], data[:, p])


def write_dataset(dataset: Dataset, dest=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(dataset.p)] + ["y"])
    for xrow, yv in zip(dataset.design, dataset.response):
        w.writerow([_fmt(v) for v in xrow] + [_fmt(yv)])
    return _finish(buf.getvalue(), dest)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if _INT_RE.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def write_table(records, dest=None, fmt: str = "csv", seed=None, columns=None) -> str:
    """Emit records as CSV (with a version/seed comment line) or a JSON array."""
    records = list(records)
    if columns is None:
        columns = []
        for rec in records:
            for k in rec:
                if k not in columns:
                    columns.append(k)
    if fmt == "json":
        out = [{c: _json_value(rec.get(c)) for c in columns} for rec in records]
        text = json.dumps(out, indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# robust-t v{__version__} seed={'' if seed is None else seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        raise InvalidInputError(f"format must be csv or json, got {fmt!r}")
    return _finish(text, dest)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return _fmt(v)
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_table(source, fmt: str = None):
    """Parse a table written by :func:`write_table`; returns (records, meta)."""
    text = _read_text(source)
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("[") else "csv"
    if fmt == "json":
        recs = json.loads(text)
        out = []
        for rec in recs:
            out.append({k: (_parse(v) if isinstance(v, str) and v.lower() in ("nan", "inf", "-inf") else v)
                        for k, v in rec.items()})
        return out, {}
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = _parse(v)
            elif tok.startswith("v"):
                meta["version"] = tok[1:]
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        return [], meta
    return [{h: _parse(v) for h, v in zip(header, row)} for row in reader], meta


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    path = Path(source)
    if not path.exists():
        raise InvalidInputError(f"no such file: {path}")
    return path.read_text(encoding="utf-8")


def _finish(text: str, dest):
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8", newline="\n")
    return text
