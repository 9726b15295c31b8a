"""CSV and JSON helpers: header row, '.' decimal, UTF-8, LF line ends."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .variogram import model_from_dict


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows, int_cols=(), prefix_cols=None):
    """Write a numeric table; ``prefix_cols`` adds leading string columns.

    ``path`` may be a filename or an open text stream.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else np.zeros((0, len(header)))
    own = not hasattr(path, "write")
    fh = open(path, "w", encoding="utf-8", newline="") if own else path
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(rows):
            cells = [str(int(v)) if j in int_cols else _fmt(v) for j, v in enumerate(row)]
            if prefix_cols is not None:
                cells = list(prefix_cols[i]) + cells
            w.writerow(cells)
    finally:
        if own:
            fh.close()


def read_csv(path):
    """Read a numeric table; returns ``(header, ndarray)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric cell ({exc})") from exc
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows")
    return header, data


def read_locations(path):
    """Coordinates from every column except ``value``."""
    header, data = read_csv(path)
    cols = [i for i, h in enumerate(header) if h != "value"]
    if not cols:
        raise ConfigError(f"{path}: no coordinate columns")
    return [header[i] for i in cols], data[:, cols]


def read_observations(path):
    """``(coord_names, locations, values)`` from a CSV with a ``value`` column."""
    header, data = read_csv(path)
    if "value" not in header:
        raise ConfigError(f"{path}: needs a 'value' column")
    v = header.index("value")
    cols = [i for i in range(len(header)) if i != v]
    return [header[i] for i in cols], data[:, cols], data[:, v]


def read_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(obj)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
