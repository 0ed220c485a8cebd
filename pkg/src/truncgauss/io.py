"""Sample-batch files and small CSV/JSON helpers.

CSV batches have a header ``x0,...,x{d-1}`` and one row per point. Binary
batches are column-oriented: the 8-byte magic ``TGAUSS01``, then ``d`` and
``n`` as little-endian uint64, then the ``d`` columns of ``n`` little-endian
float64 values each.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

MAGIC = b"TGAUSS01"


def write_csv_batch(path, x) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    header = ",".join(f"x{i}" for i in range(x.shape[1]))
    np.savetxt(path, x, delimiter=",", header=header, comments="", fmt="%.17g")


def read_csv_batch(path) -> np.ndarray:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if header != [f"x{i}" for i in range(len(header))]:
            raise InvalidInputError(f"{path}: expected header x0..x{{d-1}}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        return np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: row width differs from header")
    return data


def write_binary_batch(path, x) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", d, n))
        fh.write(np.asfortranarray(x).astype("<f8").tobytes(order="F"))


def read_binary_batch(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC or len(raw) < 24:
        raise InvalidInputError(f"{path}: not a sample batch file")
    d, n = struct.unpack("<QQ", raw[8:24])
    body = raw[24:]
    if len(body) != 8 * d * n:
        raise InvalidInputError(f"{path}: truncated or oversized payload")
    return np.frombuffer(body, dtype="<f8").reshape((n, d), order="F").astype(float)


def read_batch(path) -> np.ndarray:
    """Read a batch, choosing the format from the file's first bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    return read_binary_batch(path) if head == MAGIC else read_csv_batch(path)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return v


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
