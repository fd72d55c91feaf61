"""Spectral auto- and cross-correlation estimators.

All estimators use the biased 1/N normalization at every lag, which is
what the zero-padded spectral product computes directly.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    MissingVolume,
    NonPositiveCorrelationInRange,
    SeriesTooShort,
    ZeroVariance,
)
from .numerics import fft_real, ifft_real, linear_fit, next_power_of_two
from .series import as_array, log_returns

KINDS = ("acf-returns", "acf-volatility", "volume-volatility", "coarse-fine", "acf")
PROXIES = ("squared-return", "rolling-variance")


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    lags: np.ndarray
    values: np.ndarray
    kind: str
    n: int
    mode: str = "coefficient"

    @property
    def noise_band(self) -> float:
        """Half-width of the 3-sigma band for an uncorrelated pair of length ``n``."""
        return 3.0 / math.sqrt(self.n)

    def at(self, lag: int) -> float:
        idx = np.flatnonzero(self.lags == lag)
        if idx.size == 0:
            raise KeyError(lag)
        return float(self.values[idx[0]])

    def asymmetry(self):
        """``(tau, C(tau) - C(-tau))`` for ``tau >= 0`` on a symmetric lag axis."""
        pos = self.lags[self.lags >= 0]
        pos = pos[np.isin(-pos, self.lags)]
        delta = np.array([self.at(int(t)) - self.at(-int(t)) for t in pos])
        return pos, delta

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("lag,value\n")
            for lag, v in zip(self.lags, self.values):
                fh.write(f"{int(lag)},{float(v)!r}\n")


def _demeaned(x):
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def autocorrelation(signal, max_lag: int, kind: str = "acf") -> CorrelationCurve:
    """Wiener-Khinchin autocorrelation, normalized to 1 at lag 0.

    The mean-removed signal is zero-padded to a power of two of at least
    twice its length so the circular product has no wrap-around.
    """
    x = _demeaned(as_array(signal))
    n = x.size
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if n < 2 * max(max_lag, 1):
        raise SeriesTooShort(f"signal of length {n} too short for max_lag={max_lag}")
    L = next_power_of_two(2 * n)
    X = fft_real(x, L)
    acov = ifft_real((X * np.conj(X)).real, L)[: max_lag + 1]
    if not acov[0] > 0:
        raise ZeroVariance("signal has zero variance")
    vals = acov / acov[0]
    vals[0] = 1.0
    return CorrelationCurve(np.arange(max_lag + 1), vals, kind, n)


def direct_autocorrelation(signal, max_lag: int) -> np.ndarray:
    """O(N * max_lag) reference: ``sum_t x_t x_{t+tau} / sum_t x_t^2`` on demeaned data."""
    x = _demeaned(as_array(signal))
    denom = float(np.dot(x, x))
    return np.array([np.dot(x[: x.size - k], x[k:]) / denom for k in range(int(max_lag) + 1)])


def _cross_raw(x, y, max_lag):
    n = x.size
    L = next_power_of_two(2 * n)
    c = ifft_real(fft_real(x, L) * np.conj(fft_real(y, L)), L)
    lags = np.arange(-max_lag, max_lag + 1)
    return lags, c[lags % L] / n


def cross_correlation(x, y, max_lag: int, kind: str = "cross", mode: str = "coefficient") -> CorrelationCurve:
    """``C(tau) = <x(t + tau) y(t)>`` for ``tau = -max_lag .. max_lag``.

    ``mode="coefficient"`` demeans both series and divides by the product of
    their population standard deviations; ``mode="raw"`` returns the plain
    lagged second moment.
    """
    x = as_array(x)
    y = as_array(y)
    if x.size != y.size:
        raise ValueError("cross_correlation needs series of equal length")
    max_lag = int(max_lag)
    if x.size < 2 * max(max_lag, 1):
        raise SeriesTooShort(f"series of length {x.size} too short for max_lag={max_lag}")
    if mode == "coefficient":
        xd, yd = _demeaned(x), _demeaned(y)
        sx, sy = math.sqrt(np.mean(xd * xd)), math.sqrt(np.mean(yd * yd))
        if not (sx > 0 and sy > 0):
            raise ZeroVariance("cross-correlation of a constant series")
        lags, c = _cross_raw(xd, yd, max_lag)
        c = np.clip(c / (sx * sy), -1.0, 1.0)
    elif mode == "raw":
        lags, c = _cross_raw(x, y, max_lag)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return CorrelationCurve(lags, c, kind, x.size, mode)


def direct_cross_correlation(x, y, max_lag: int) -> np.ndarray:
    """Reference coefficient-mode cross-correlation by explicit sums."""
    xd, yd = _demeaned(as_array(x)), _demeaned(as_array(y))
    n = xd.size
    norm = n * math.sqrt(np.mean(xd * xd) * np.mean(yd * yd))
    out = []
    for k in range(-int(max_lag), int(max_lag) + 1):
        if k >= 0:
            out.append(np.dot(xd[k:], yd[: n - k]))
        else:
            out.append(np.dot(xd[: n + k], yd[-k:]))
    return np.array(out) / norm


@dataclass(frozen=True)
class ClusteringSlopes:
    """Decay slopes ``-dA/dlog10(tau)`` for the r and r^2 autocorrelations."""

    slope_r: float
    stderr_r: float
    slope_r2: float
    stderr_r2: float
    fit_lag_range: tuple
    r2_nonpositive: bool

    def as_dict(self):
        return {"slope_r": self.slope_r, "stderr_r": self.stderr_r, "slope_r2": self.slope_r2,
                "stderr_r2": self.stderr_r2, "fit_lag_range": list(self.fit_lag_range),
                "r2_nonpositive": self.r2_nonpositive}


def volatility_clustering_slopes(returns, fit_lag_range=(1, 50), strict: bool = True):
    """Regress the r and r^2 autocorrelations on ``log10(tau)`` over ``fit_lag_range``.

    Slopes are reported with the sign flipped so a persistent, decaying
    correlation yields a positive value. With ``strict`` the fit refuses to
    run when the r^2 curve is not strictly positive over the range.

    Returns
    -------
    ClusteringSlopes, plus the two curves ``(acf_r, acf_r2)``.
    """
    lo, hi = (int(v) for v in fit_lag_range)
    if not 1 <= lo < hi:
        raise ValueError("fit_lag_range must satisfy 1 <= lo < hi")
    r = as_array(returns)
    acf_r = autocorrelation(r, hi, "acf-returns")
    acf_r2 = autocorrelation(r * r, hi, "acf-volatility")
    sel = slice(lo, hi + 1)
    lags = np.log10(np.arange(lo, hi + 1))
    nonpos = bool(np.any(acf_r2.values[sel] <= 0))
    if strict and nonpos:
        raise NonPositiveCorrelationInRange(
            f"squared-return autocorrelation is not positive on lags {lo}..{hi}")
    fr = linear_fit(lags, acf_r.values[sel])
    fr2 = linear_fit(lags, acf_r2.values[sel])
    slopes = ClusteringSlopes(-fr.slope, fr.slope_stderr, -fr2.slope, fr2.slope_stderr, (lo, hi), nonpos)
    return slopes, acf_r, acf_r2


def volatility_proxy(returns, proxy: str = "squared-return", window: int = 21):
    """Volatility per bar and the offset of its first entry within the returns.

    ``squared-return`` is ``(r - <r>)^2``; ``rolling-variance`` is the
    population variance over a centered window of odd length ``window``.
    """
    r = as_array(returns)
    if proxy == "squared-return":
        d = r - r.mean()
        return d * d, 0
    if proxy == "rolling-variance":
        window = int(window)
        if window < 3 or window % 2 == 0:
            raise ValueError("rolling-variance window must be an odd integer >= 3")
        if r.size < window:
            raise SeriesTooShort("series shorter than the rolling window")
        return sliding_window_view(r, window).var(axis=1), window // 2
    raise ValueError(f"unknown volatility proxy {proxy!r}; expected one of {PROXIES}")


def volume_volatility_correlation(series, max_lag: int, proxy: str = "squared-return",
                                  window: int = 21, mode: str = "coefficient") -> CorrelationCurve:
    """Cross-correlation ``<vol(t + tau) sigma^2(t)>``.

    The return ``ln p[m+1] - ln p[m]`` is attributed to bar ``m + 1`` and
    paired with that bar's volume. A positive peak lag means volume trails
    volatility by that many bars.
    """
    if not series.has_volume:
        raise MissingVolume("series has no volume column")
    r = log_returns(series, 1).values
    w = window if proxy == "rolling-variance" else 1
    if r.size < 2 * max(int(max_lag), 1) + w:
        raise SeriesTooShort("series too short for the requested lags and proxy window")
    vol, offset = volatility_proxy(r, proxy, window)
    volume = series.volumes[1 + offset: 1 + offset + vol.size]
    return cross_correlation(volume, vol, max_lag, "volume-volatility", mode)


def coarse_fine_correlation(series, T: int = 4000, max_lag: int = 100,
                            mode: str = "coefficient") -> CorrelationCurve:
    """Correlation between coarse (``T``-bar) and fine (1-bar) squared deviations.

    ``C(tau) = <(r_T(t + tau) - <r_T>)^2 (r(t) - <r>)^2>``, both series
    starting at bar ``t``; call :meth:`CorrelationCurve.asymmetry` for
    ``C(tau) - C(-tau)``.
    """
    prices = series.prices
    n = prices.size
    T = int(T)
    max_lag = int(max_lag)
    if T < 1 or max_lag < 0:
        raise ValueError("T must be positive and max_lag non-negative")
    if n <= T + max_lag:
        raise SeriesTooShort(f"series of length {n} too short for T={T}, max_lag={max_lag}")
    lp = np.log(prices)
    m = n - T
    coarse = lp[T:] - lp[:m]
    fine = lp[1:m + 1] - lp[:m]
    if m < 2 * max(max_lag, 1):
        raise SeriesTooShort(f"only {m} aligned bars for max_lag={max_lag}")
    x = (coarse - coarse.mean()) ** 2
    y = (fine - fine.mean()) ** 2
    return cross_correlation(x, y, max_lag, "coarse-fine", mode)
