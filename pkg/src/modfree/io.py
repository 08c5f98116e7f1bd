"""CSV records and JSON manifests.

CSV files start with a ``# config_hash=...`` line, then a header row;
floats are written with ``repr`` so files round-trip exactly and are
byte-identical across repeated runs.  Timestamps only go to manifests.
"""

import csv
import datetime
import json
import math
import os

import numpy as np


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, rows, columns=None, config_hash=""):
    """Write dict rows; ``columns`` defaults to the keys of the first row."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
    return path


def _parse(s):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path):
    """Return ``(config_hash, rows)`` with numeric cells converted."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# config_hash="):
            raise ValueError(f"{path}: missing config_hash line")
        chash = first.strip().split("=", 1)[1]
        rows = [{k: _parse(v) for k, v in r.items()} for r in csv.DictReader(fh)]
    return chash, rows


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_manifest(path, payload, config_hash="", timestamp=True):
    body = {"config_hash": config_hash, **_jsonable(payload)}
    if timestamp:
        body["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path):
    with open(path) as fh:
        return json.load(fh)


def long_format(rows, id_columns=("t",)):
    """Melt wide rows into ``(id..., variable, value)`` rows for plotting."""
    out = []
    for r in rows:
        ids = {c: r[c] for c in id_columns if c in r}
        for k, v in r.items():
            if k in ids:
                continue
            out.append({**ids, "variable": k, "value": v})
    return out
