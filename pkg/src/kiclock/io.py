"""CSV and metadata serialization with fixed numeric formatting."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circuit import CouplingSet
from .errors import InvalidArgumentError
from .modes import Trace
from .spin import Transition

FMT = "%.12g"


def fmt(x) -> str:
    return FMT % x


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def table_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write(path, table_text(header, rows))


def trace_text(trace: Trace, axis_name: str = "axis") -> str:
    v = trace.values
    rows = zip(trace.axis, v.real, v.imag, np.abs(v))
    return table_text([axis_name, "real", "imag", "abs"], ([float(x) for x in r] for r in rows))


def write_trace(path, trace: Trace, axis_name: str = "axis") -> Path:
    """Trace as CSV with columns (axis, real, imag, abs)."""
    return atomic_write(path, trace_text(trace, axis_name))


def read_trace(path) -> Trace:
    """Read (axis, real, imag[, abs]) or (axis, magnitude) CSV into a Trace.

    A header row is detected by a non-numeric first field.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and not _numeric(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise InvalidArgumentError(f"{path}: no data rows")
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] < 2:
        raise InvalidArgumentError(f"{path}: need at least two columns")
    if data.shape[1] == 2:
        values = data[:, 1].astype(complex)
    else:
        values = data[:, 1] + 1j * data[:, 2]
    return Trace(data[:, 0], values, {"source": str(path)})


def _numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


CATALOG_HEADER = ("Bz_T", "F_lower", "m_lower", "F_upper", "m_upper", "freq_Hz", "dipole", "dfdB_Hz_per_T")


def catalog_rows(items: Iterable[Transition]):
    for t in items:
        yield (
            float(t.Bz), t.lower[0], t.lower[1], t.upper[0], t.upper[1],
            float(t.frequency), float(t.dipole), float(t.sensitivity),
        )


def write_catalog(path, items: Iterable[Transition]) -> Path:
    """Transition catalog CSV."""
    return write_table(path, CATALOG_HEADER, catalog_rows(items))


COUPLING_FIELDS = ("Ltilde_a", "Ltilde_b", "Za", "Zb", "fa", "fb", "g11", "g21", "g12", "g30", "g03", "k", "Istar_c", "g3wm", "induced_loss")


def write_couplings(path, couplings: CouplingSet) -> Path:
    """Coupling table as ``name,value`` rows."""
    return write_table(path, ("name", "value"), ((n, float(getattr(couplings, n))) for n in COUPLING_FIELDS))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(fmt(float(obj)))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [float(fmt(obj.real)), float(fmt(obj.imag))]
    return obj


def write_metadata(path, meta: dict) -> Path:
    """Sorted-key JSON sidecar."""
    return atomic_write(path, json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
