"""CSV/JSON serialization and atomic file output."""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .lattices import PointSet
from .stft import Signal, TFSampleSet
from .windows import WindowSpec

POINT_HEADER = ["idx", "x", "omega", "n1", "s1", "n2", "s2"]
SAMPLE_HEADER = ["x", "omega", "magnitude"]
COUNTEREXAMPLE_HEADER = ["re", "im", "F_re", "F_im", "envelope_ratio"]


def fmt(v) -> str:
    """17 significant digits for floats, plain text for integers."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    d = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=d, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows_to_csv(header, rows) -> str:
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(v) for v in row])
    return buf.getvalue()


def pointset_csv(ps: PointSet) -> str:
    if ps.dim != 2:
        raise ValueError("PointSet CSV holds planar point sets only")
    idx = ps.indices if ps.indices is not None else np.full((len(ps), 2, 2), -1)
    rows = (
        (i, p[0], p[1], ix[0, 0], ix[0, 1], ix[1, 0], ix[1, 1])
        for i, (p, ix) in enumerate(zip(ps.points, idx))
    )
    return _rows_to_csv(POINT_HEADER, rows)


def read_pointset_csv(path) -> PointSet:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    pts = arr[:, 1:3]
    idx = arr[:, 3:7].astype(np.int64).reshape(-1, 2, 2)
    return PointSet(pts, idx)


def samples_csv(s: TFSampleSet) -> str:
    rows = ((p[0], p[1], m) for p, m in zip(s.points, s.magnitudes))
    return _rows_to_csv(SAMPLE_HEADER, rows)


def read_samples_csv(path) -> TFSampleSet:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TFSampleSet(arr[:, :2], arr[:, 2])


def table_csv(header, table) -> str:
    return _rows_to_csv(header, np.asarray(table))


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip float repr."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_signal(path) -> Signal:
    return Signal.from_dict(load_json(path))


def load_window(path) -> WindowSpec:
    return WindowSpec.from_dict(load_json(path))
