"""CSV and JSON input/output.

Writers format every float with 9 significant digits and use ``\\n`` line
endings, so identical inputs give byte-identical files. Files are written
to a temporary sibling and renamed into place, so a failure never leaves a
partial file behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fitting import EchoDecayTrace, FitResult
from .spectra import RotationPattern, StickSpectrum

__all__ = [
    "format_number",
    "atomic_write_text",
    "csv_text",
    "spectrum_rows",
    "write_spectrum_csv",
    "write_rotation_csv",
    "write_trace_csv",
    "write_model_csv",
    "write_fit_json",
    "read_trace_csv",
    "read_series_csv",
    "SPECTRUM_COLUMNS",
]

SPECTRUM_COLUMNS = ("angle_deg", "field_mT", "moment_muB", "subsite", "lower", "upper", "kind", "delta_MI")


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if v == 0.0:
            return "0"
        return f"{v:.9g}"
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _label(m: float) -> str:
    v = float(m)
    return str(int(v)) if v == int(v) else f"{int(round(2 * v))}/2"


def spectrum_rows(spectrum: StickSpectrum, angle: float | None = None) -> list[tuple]:
    rows = []
    for ln in spectrum.lines:
        a = ln.angle_deg if angle is None else angle
        rows.append((
            float("nan") if a is None else float(a),
            ln.field_mT,
            ln.moment,
            ln.subsite or "",
            ln.lower,
            ln.upper,
            ln.kind,
            int(round(ln.delta_MI)),
        ))
    return rows


def write_spectrum_csv(path, spectrum: StickSpectrum, angle: float | None = None) -> Path:
    return atomic_write_text(path, csv_text(SPECTRUM_COLUMNS, spectrum_rows(spectrum, angle)))


def write_rotation_csv(path, pattern: RotationPattern) -> Path:
    rows = []
    for angle, spec in zip(pattern.angles, pattern.spectra):
        rows.extend(spectrum_rows(spec, float(angle)))
    return atomic_write_text(path, csv_text(SPECTRUM_COLUMNS, rows))


def write_trace_csv(path, values, signal) -> Path:
    return atomic_write_text(path, csv_text(("swept_value", "signal"), zip(values, signal)))


def write_model_csv(path, temperatures, rates, times_us) -> Path:
    return atomic_write_text(path, csv_text(("T_K", "rate", "time_us"), zip(temperatures, rates, times_us)))


def write_fit_json(path, result: FitResult) -> Path:
    text = json.dumps(result.as_dict(), indent=2, sort_keys=False, default=float) + "\n"
    return atomic_write_text(path, text)


def _read_numeric(path, min_cols: int) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = None
    try:
        [float(x) for x in rows[0]]
    except ValueError:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric data ({exc})") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] < min_cols:
        raise ValueError(f"{path}: need at least {min_cols} numeric columns")
    return header, data


def read_trace_csv(path) -> EchoDecayTrace:
    """Columns delay_us, amplitude[, sigma]; a header line is optional."""
    _, d = _read_numeric(path, 2)
    sigma = d[:, 2] if d.shape[1] >= 3 else None
    return EchoDecayTrace(d[:, 0], d[:, 1], sigma)


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Columns T_K, time_constant[, sigma]; returns (T, values, sigma)."""
    _, d = _read_numeric(path, 2)
    sigma = d[:, 2] if d.shape[1] >= 3 else None
    return d[:, 0], d[:, 1], sigma
