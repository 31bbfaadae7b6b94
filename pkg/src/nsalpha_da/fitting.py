"""Exponential decay-rate fits of diagnostics series."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from nsalpha_da.assimilation import CSV_COLUMNS, DiagnosticsRecord
from nsalpha_da.errors import ConfigurationError

FLOOR_REL = 1e4 * np.finfo(float).eps
MIN_RECORDS = 10


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    window: tuple[float, float]
    r_squared: float
    n_points: int
    truncated_at: float | None = None  # time of the first floor crossing, if any

    @property
    def note(self) -> str:
        if self.truncated_at is None:
            return ""
        return f"series reached the roundoff floor at t={self.truncated_at:.6g}; fit truncated there"


def fit_decay(records, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares fit of log(err_combined) against t; gamma is minus the slope.

    ``records`` are DiagnosticsRecord objects or (t, value) pairs.  Points
    at or below 1e4 * eps * (first in-window value) end the fit.
    """
    t, y = _series(records)
    if window is not None:
        lo, hi = window
        keep = (t >= lo) & (t <= hi)
        t, y = t[keep], y[keep]
    if t.size == 0 or not y[0] > 0:
        raise ConfigurationError("decay fit needs a positive first value in the window")
    floor = FLOOR_REL * y[0]
    below = np.nonzero(y <= floor)[0]
    truncated_at = None
    if below.size:
        truncated_at = float(t[below[0]])
        t, y = t[: below[0]], y[: below[0]]
    if t.size < MIN_RECORDS:
        raise ConfigurationError(f"decay fit needs >= {MIN_RECORDS} usable records, got {t.size}")
    logy = np.log(y)
    if np.ptp(logy) == 0.0:
        return DecayFit(0.0, (float(t[0]), float(t[-1])), 1.0, int(t.size), truncated_at)
    res = stats.linregress(t, logy)
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return DecayFit(-float(res.slope), (float(t[0]), float(t[-1])), r2, int(t.size), truncated_at)


def _series(records):
    records = list(records)
    if records and isinstance(records[0], DiagnosticsRecord):
        return (
            np.array([r.t for r in records], dtype=float),
            np.array([r.err_combined for r in records], dtype=float),
        )
    arr = np.asarray(records, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def read_diagnostics(path) -> list[DiagnosticsRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: header does not match the diagnostics schema")
        return [DiagnosticsRecord(*map(float, row)) for row in reader if row]
