"""File formats: dense complex matrices, CSV tables, JSON-safe conversion.

Dense matrix text format::

    # ncorbifold dense matrix v1
    # shape <rows> <cols>
    <re_00> <im_00> <re_01> <im_01> ...
    ...

One line per row, real and imaginary parts interleaved, printed with 17
significant digits so a round trip is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

MATRIX_HEADER = "# ncorbifold dense matrix v1"


def write_dense_matrix(path, mat) -> None:
    m = np.atleast_2d(np.asarray(mat, dtype=complex))
    lines = [MATRIX_HEADER, f"# shape {m.shape[0]} {m.shape[1]}"]
    for row in m:
        parts = []
        for z in row:
            parts.append(f"{z.real:.17g}")
            parts.append(f"{z.imag:.17g}")
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dense_matrix(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MATRIX_HEADER:
        raise ValueError(f"{path}: missing dense matrix header")
    tok = lines[1].split()
    if len(tok) != 4 or tok[1] != "shape":
        raise ValueError(f"{path}: malformed shape line")
    rows, cols = int(tok[2]), int(tok[3])
    data = [[float(v) for v in line.split()] for line in lines[2:] if line.strip()]
    arr = np.array(data, dtype=float).reshape(rows, 2 * cols) if rows else np.zeros((0, 2 * cols))
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def fmt(value) -> str:
    """12 significant digits, stable across runs."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_spectrum_csv(path, eigs) -> None:
    write_csv(path, ["index", "eigenvalue"], [(i, float(e)) for i, e in enumerate(eigs)])


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")
