"""Field CSV and JSON report writers."""
from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from ..morlicz import DiscreteField


def _g17(v):
    return format(float(v), ".17g")


def write_field_csv(path, field: DiscreteField):
    """Header ``t,x1[,x2],value`` (scalar) or ``t,x1[,x2],v1[,v2]`` (vector); rows by time, then space."""
    d = field.x.shape[1]
    head = ["t"] + [f"x{i + 1}" for i in range(d)]
    head += [f"v{i + 1}" for i in range(field.values.shape[2])] if field.is_vector else ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for i, t in enumerate(field.t):
            ts = _g17(t)
            vals = field.values[i]
            for j in range(field.x.shape[0]):
                row = [ts] + [_g17(c) for c in field.x[j]]
                row += [_g17(c) for c in vals[j]] if field.is_vector else [_g17(vals[j])]
                w.writerow(row)


def read_field_csv(path):
    """Returns ``(t, x, values)`` with values shaped ``(n_t, n_s[, d])``."""
    with open(path) as fh:
        r = csv.reader(fh)
        head = next(r)
        rows = np.array([[float(c) for c in row] for row in r])
    d = sum(1 for h in head if h.startswith("x"))
    t_all = rows[:, 0]
    t = np.unique(t_all)
    n_s = rows.shape[0] // t.size
    x = rows[:n_s, 1 : 1 + d]
    vals = rows[:, 1 + d :]
    shape = (t.size, n_s) if vals.shape[1] == 1 and head[-1] == "value" else (t.size, n_s, vals.shape[1])
    return t, x, vals.reshape(shape)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_report(path, report: dict):
    with open(path, "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
