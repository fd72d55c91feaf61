"""Global persistence of prices.

For a start bar ``s`` the positive run length is the largest ``d`` such
that ``p(s + u) >= p(s)`` for every ``u = 0 .. d``; the negative run uses
``<=``. Ties persist on both branches. ``P+(t)`` and ``P-(t)`` are the
survival functions of those run lengths and ``P_g`` is their mean.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .density import PowerLawFit, power_law_fit
from .errors import InsufficientRange, SeriesTooShort
from .numerics import make_rng

_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class PersistenceCurve:
    """Survival probabilities on ``durations = 0 .. max_duration``.

    ``plus_counts[t]`` (``minus_counts[t]``) is the number of sampled starts
    whose positive (negative) run lasted at least ``t`` bars. Runs still
    alive at ``max_duration`` are censored: they count as survivors at every
    duration and are tallied in ``censored_count`` (both branches summed).
    """

    durations: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    p_global: np.ndarray
    n_samples: int
    censored_count: int
    plus_counts: np.ndarray
    minus_counts: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,p_plus,p_minus,p_global,n_at_risk\n")
            for i, t in enumerate(self.durations):
                at_risk = int(self.plus_counts[i] + self.minus_counts[i])
                fh.write(f"{int(t)},{self.p_plus[i]!r},{self.p_minus[i]!r},{self.p_global[i]!r},{at_risk}\n")


def run_durations(prices, starts, max_duration: int):
    """Positive and negative run lengths (capped at ``max_duration``) for each start."""
    p = np.asarray(prices, dtype=float)
    starts = np.asarray(starts, dtype=np.int64)
    D = int(max_duration)
    if starts.size and (starts.min() < 0 or starts.max() + D >= p.size):
        raise SeriesTooShort("a start leaves fewer than max_duration bars of future prices")
    plus = np.empty(starts.size, dtype=np.int64)
    minus = np.empty(starts.size, dtype=np.int64)
    offsets = np.arange(1, D + 1)
    step = max(1, _CHUNK_CELLS // max(D, 1))
    for i in range(0, starts.size, step):
        s = starts[i:i + step]
        window = p[s[:, None] + offsets[None, :]]
        p0 = p[s][:, None]
        plus[i:i + step] = _first_failure(window < p0, D)
        minus[i:i + step] = _first_failure(window > p0, D)
    return plus, minus


def _first_failure(failed, D):
    """Index of the first failing step (0-based offset) = surviving run length."""
    any_fail = failed.any(axis=1)
    first = np.argmax(failed, axis=1)
    return np.where(any_fail, first, D)


def curve_from_durations(plus, minus, max_duration: int) -> PersistenceCurve:
    D = int(max_duration)
    plus = np.asarray(plus, dtype=np.int64)
    minus = np.asarray(minus, dtype=np.int64)
    n = plus.size
    if n == 0:
        raise SeriesTooShort("no runs to summarize")
    # counts[t] = #{runs with length >= t}
    plus_counts = np.cumsum(np.bincount(plus, minlength=D + 1)[::-1])[::-1]
    minus_counts = np.cumsum(np.bincount(minus, minlength=D + 1)[::-1])[::-1]
    p_plus = plus_counts / n
    p_minus = minus_counts / n
    censored = int(np.sum(plus >= D) + np.sum(minus >= D))
    return PersistenceCurve(np.arange(D + 1), p_plus, p_minus, 0.5 * (p_plus + p_minus), n,
                            censored, plus_counts, minus_counts)


def persistence_curve(series, n_starts: int = 40_000, max_duration: int = 1000, seed: Optional[int] = 0,
                      exhaustive: bool = False, starts: Optional[Sequence[int]] = None) -> PersistenceCurve:
    """Estimate ``P+``, ``P-`` and ``P_g`` from sampled start bars.

    Starts are drawn uniformly with replacement from
    ``[0, N - max_duration - 1]`` using ``make_rng(seed)``. With
    ``exhaustive=True`` every admissible start is used once and ``seed`` is
    ignored; ``starts`` pins an explicit start set.
    """
    prices = series.prices if hasattr(series, "prices") else np.asarray(series, dtype=float)
    n = prices.size
    D = int(max_duration)
    if D < 1:
        raise ValueError("max_duration must be positive")
    if n <= D + 1:
        raise SeriesTooShort(f"series of length {n} too short for max_duration={D}")
    last = n - D - 1
    if starts is not None:
        s = np.asarray(starts, dtype=np.int64)
    elif exhaustive:
        s = np.arange(last + 1)
    else:
        if seed is None:
            raise ValueError("a seed is required for sampled starts")
        s = make_rng(seed).integers(0, last + 1, size=int(n_starts))
    plus, minus = run_durations(prices, s, D)
    return curve_from_durations(plus, minus, D)


def fit_persistence_exponent(curve: PersistenceCurve, fit_range=(1, 100), min_points: int = 5) -> PowerLawFit:
    """Fit ``P_g(t) ~ t^-theta`` on ``[t_lo, t_hi]``; the returned exponent is ``theta``.

    The stored ``exponent`` is the global persistence exponent (the negated
    log-log slope); ``prefactor`` and stderr come from the same regression.
    """
    lo, hi = fit_range
    t = curve.durations
    sel = (t >= max(lo, 1)) & (t <= hi) & (curve.p_global > 0)
    if sel.sum() < min_points:
        raise InsufficientRange(f"only {int(sel.sum())} usable points in {fit_range}")
    f = power_law_fit(t[sel].astype(float), curve.p_global[sel])
    return PowerLawFit(-f.exponent, f.prefactor, f.exponent_stderr, f.fit_range, f.residual_norm,
                       f.n_points, f.r_squared)
