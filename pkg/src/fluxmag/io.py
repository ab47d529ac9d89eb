"""CSV readers and writers for curves, time series and spectra."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .dsp import Spectrum, TimeSeries


def format_csv(header, columns) -> str:
    """Render equal-length columns as CSV text with ``repr``-exact floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_csv(path, header, columns) -> None:
    Path(path).write_text(format_csv(header, columns))


def write_curve(path, x, S, sigma=None, x_name="x") -> None:
    """Curve export with columns (x, S[, sigma])."""
    header = [x_name, "S"] + (["sigma"] if sigma is not None else [])
    cols = [x, S] + ([sigma] if sigma is not None else [])
    write_csv(path, header, cols)


def read_columns(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header, data


TIMESERIES_HEADER = ["t_s", "B_T"]
SPECTRUM_HEADER = ["f_Hz", "asd_T_per_rtHz"]


def write_timeseries(path, ts: TimeSeries) -> None:
    write_csv(path, TIMESERIES_HEADER, [ts.t, ts.samples])


def read_timeseries(path) -> TimeSeries:
    """Two-column (t, value) CSV; the sampling rate is taken from the time column."""
    _, data = read_columns(path)
    if data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: need at least two rows of (t, value)")
    dt = np.diff(data[:, 0])
    step = float(np.mean(dt))
    if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step:
        raise ValueError(f"{path}: time column is not uniformly sampled")
    return TimeSeries(data[:, 1], 1.0 / step)


def write_spectrum(path, sp: Spectrum) -> None:
    write_csv(path, SPECTRUM_HEADER, [sp.f, sp.asd])
