"""Deterministic CSV/JSON output and ``.npz`` checkpoints."""
import json
import math
from pathlib import Path

import numpy as np


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(path, header, columns):
    """Write equal-length columns with 17 significant digits, enough to round-trip doubles."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len(cols) != len(header) or len({c.size for c in cols}) > 1:
        raise ValueError("header and columns must agree in count and length")
    table = np.column_stack(cols) if cols else np.empty((0, 0))
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_csv(path):
    """Return ``(header, array)`` for a file written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def save_checkpoint(path, **arrays):
    np.savez(path, **{k: np.asarray(v) for k, v in arrays.items()})


def load_checkpoint(path):
    with np.load(path) as data:
        return {k: data[k].copy() for k in data.files}
