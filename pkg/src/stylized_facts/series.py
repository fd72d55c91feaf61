"""Price series ingestion and log returns."""

import csv
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .errors import (
    NonMonotonicTimestamps,
    NonPositivePrice,
    ParseError,
    SeriesTooShort,
    ZeroVariance,
)


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Timestamped close prices with optional volume.

    Attributes
    ----------
    timestamps : ndarray of int64
        Epoch seconds, strictly increasing.
    prices : ndarray of float
        Close prices, all strictly positive.
    volumes : ndarray of float or None
        Traded volume per bar, non-negative.
    cadence : int
        Declared sampling interval in seconds (60 for minute bars).
    """

    timestamps: np.ndarray
    prices: np.ndarray
    volumes: Optional[np.ndarray] = None
    cadence: int = 86400

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        p = _frozen(self.prices)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", p)
        if ts.ndim != 1 or p.shape != ts.shape:
            raise ValueError("timestamps and prices must be 1-d arrays of equal length")
        if self.volumes is not None:
            v = _frozen(self.volumes)
            if v.shape != ts.shape:
                raise ValueError("volumes must have the same length as prices")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("volumes must be finite and non-negative")
            object.__setattr__(self, "volumes", v)
        bad = np.flatnonzero(np.diff(ts) <= 0)
        if bad.size:
            raise NonMonotonicTimestamps(int(bad[0]) + 2)
        nonpos = np.flatnonzero(~(p > 0) | ~np.isfinite(p))
        if nonpos.size:
            raise NonPositivePrice(int(nonpos[0]) + 1)
        if int(self.cadence) <= 0:
            raise ValueError("cadence must be a positive number of seconds")
        object.__setattr__(self, "cadence", int(self.cadence))

    def __len__(self):
        return self.prices.size

    @property
    def has_volume(self) -> bool:
        return self.volumes is not None

    @classmethod
    def from_prices(cls, prices, volumes=None, cadence=86400, start=0):
        """Build a series on a regular grid starting at epoch ``start``."""
        n = len(prices)
        ts = start + cadence * np.arange(n, dtype=np.int64)
        return cls(ts, prices, volumes, cadence)

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(self.timestamps, self.prices * factor, self.volumes, self.cadence)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log returns at a time scale of ``scale_tau`` bars."""

    values: np.ndarray
    scale_tau: int = 1
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1:
            raise ValueError("return values must be 1-d")
        if int(self.scale_tau) < 1:
            raise ValueError("scale_tau must be a positive integer")
        object.__setattr__(self, "scale_tau", int(self.scale_tau))

    def __len__(self):
        return self.values.size


def as_array(returns) -> np.ndarray:
    """Accept a ReturnSeries or any 1-d array-like and return a float array."""
    if isinstance(returns, ReturnSeries):
        return returns.values
    arr = np.asarray(returns, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a 1-d series")
    return arr


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnSchema:
    timestamp: str = "timestamp"
    close: str = "close"
    volume: Optional[str] = None
    cadence: Optional[int] = None


def _parse_iso(text):
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _timestamps_from_cells(cells, column):
    """Epoch seconds or ISO-8601, decided for the whole column."""
    if cells and all(_is_float(c) for c in cells):
        out = []
        for row, c in enumerate(cells, start=1):
            v = float(c)
            if not v.is_integer():
                raise ParseError(row, column, "epoch seconds must be integral")
            out.append(int(v))
        return out
    out = []
    for row, c in enumerate(cells, start=1):
        try:
            out.append(_parse_iso(c))
        except ValueError as exc:
            raise ParseError(row, column, f"neither epoch seconds nor ISO-8601 ({exc})") from None
    return out


def load_csv(path, schema: ColumnSchema = ColumnSchema()) -> PriceSeries:
    """Read a CSV file with a header row into a validated :class:`PriceSeries`.

    Row numbers in errors count data rows from 1 (the header is row 0).
    When ``schema.cadence`` is None the cadence is the median timestamp step.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (schema.timestamp, schema.close) + ((schema.volume,) if schema.volume else ()):
            if col not in header:
                raise ParseError(0, col, f"column missing from header {header}")
        ts_cells, prices, volumes = [], [], []
        for row, rec in enumerate(reader, start=1):
            ts_cells.append((rec.get(schema.timestamp) or "").strip())
            try:
                prices.append(float(rec[schema.close]))
            except (TypeError, ValueError):
                raise ParseError(row, schema.close, repr(rec.get(schema.close))) from None
            if schema.volume:
                try:
                    volumes.append(float(rec[schema.volume]))
                except (TypeError, ValueError):
                    raise ParseError(row, schema.volume, repr(rec.get(schema.volume))) from None
    timestamps = _timestamps_from_cells(ts_cells, schema.timestamp)
    for row, p in enumerate(prices, start=1):
        if not p > 0 or not np.isfinite(p):
            raise NonPositivePrice(row)
    for row in range(1, len(timestamps)):
        if timestamps[row] <= timestamps[row - 1]:
            raise NonMonotonicTimestamps(row + 1)
    if schema.cadence is not None:
        cadence = int(schema.cadence)
    elif len(timestamps) > 1:
        cadence = int(np.median(np.diff(timestamps)))
    else:
        cadence = 86400
    return PriceSeries(np.array(timestamps, dtype=np.int64), prices,
                       volumes if schema.volume else None, cadence)


def write_csv(series: PriceSeries, path, iso: bool = False):
    """Write a series in the layout :func:`load_csv` reads with the default schema."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "close"] + (["volume"] if series.has_volume else []))
        for i in range(len(series)):
            t = int(series.timestamps[i])
            ts = datetime.fromtimestamp(t, tz=timezone.utc).isoformat() if iso else t
            row = [ts, repr(float(series.prices[i]))]
            if series.has_volume:
                row.append(repr(float(series.volumes[i])))
            w.writerow(row)


# ---------------------------------------------------------------------------
# Returns
# ---------------------------------------------------------------------------


def log_returns(series, tau: int = 1) -> ReturnSeries:
    """Overlapping log returns ``ln p[m + tau] - ln p[m]``, ``m = 0 .. N - tau - 1``.

    ``tau`` counts bars, not seconds; gaps in the timestamps are not filled.
    """
    prices = series.prices if isinstance(series, PriceSeries) else np.asarray(series, dtype=float)
    tau = int(tau)
    if tau < 1:
        raise ValueError("tau must be a positive integer")
    if prices.size <= tau:
        raise SeriesTooShort(f"series of length {prices.size} has no returns at tau={tau}")
    lp = np.log(prices)
    return ReturnSeries(lp[tau:] - lp[:-tau], tau, False)


def normalize(returns) -> ReturnSeries:
    """Standardize to zero mean and unit population (1/N) standard deviation."""
    x = as_array(returns)
    tau = returns.scale_tau if isinstance(returns, ReturnSeries) else 1
    if x.size < 2:
        raise SeriesTooShort("normalization needs at least two returns")
    mu = x.mean()
    d = x - mu
    sd = np.sqrt(np.mean(d * d))
    if not sd > 0 or sd <= 1e-15 * max(abs(mu), np.abs(x).max()):
        raise ZeroVariance("returns have zero variance")
    z = d / sd
    # second pass removes the O(eps) residual mean left by rounding
    z = z - z.mean()
    z = z / np.sqrt(np.mean(z * z))
    return ReturnSeries(z, tau, True)


def population_std(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    return float(np.sqrt(np.mean(d * d)))
