"""Plain-text output helpers: CSV tables, JSON documents and checksums."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns):
    """Write a dict of equal-length columns as a CSV file with a header row.

    Floats are written with ``repr`` so that reading them back is exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    lengths = {len(c) for c in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into a dict of string lists."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        cols = {k: [] for k in names}
        for row in reader:
            for k, v in zip(names, row):
                cols[k].append(v)
    return cols


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json_text(obj))
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
