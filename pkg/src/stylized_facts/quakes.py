"""Financial quakes: event counting, onset detection, Omori and Gutenberg-Richter fits."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateRegression,
    InsufficientData,
    NoOnsets,
    ZeroVariance,
)
from .numerics import NlsProblem, levenberg_marquardt, linear_fit
from .series import as_array, population_std


@dataclass(frozen=True, eq=False)
class EventCounter:
    """Step function ``N(t)`` for ``t = 0 .. n``.

    ``counts[t]`` is the number of bars ``t' < t`` whose absolute return
    strictly exceeds ``threshold``.
    """

    times: np.ndarray
    counts: np.ndarray
    threshold: float

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=np.int64), 0, self.counts.size - 1)
        return self.counts[t]


@dataclass(frozen=True, eq=False)
class EventCatalog:
    onsets: np.ndarray
    magnitudes: np.ndarray
    threshold: float
    min_gap: int

    def __post_init__(self):
        on = np.asarray(self.onsets, dtype=np.int64)
        mag = np.asarray(self.magnitudes, dtype=float)
        if on.shape != mag.shape:
            raise ValueError("onsets and magnitudes must have the same length")
        if on.size > 1 and np.any(np.diff(on) < self.min_gap):
            raise ValueError("onsets must be increasing with gaps of at least min_gap")
        object.__setattr__(self, "onsets", on)
        object.__setattr__(self, "magnitudes", mag)

    def __len__(self):
        return self.onsets.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["onset_index", "magnitude"])
            for o, m in zip(self.onsets, self.magnitudes):
                w.writerow([int(o), repr(float(m))])

    @classmethod
    def from_csv(cls, path, threshold: Optional[float] = None, min_gap: Optional[int] = None):
        """Load a hand-picked catalog; missing metadata is inferred from the rows."""
        onsets, mags = [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                onsets.append(int(rec["onset_index"]))
                mags.append(float(rec.get("magnitude") or "nan"))
        order = np.argsort(onsets)
        onsets = np.asarray(onsets, dtype=np.int64)[order]
        mags = np.asarray(mags)[order]
        if min_gap is None:
            min_gap = int(np.diff(onsets).min()) if onsets.size > 1 else 1
        if threshold is None:
            finite = mags[np.isfinite(mags)]
            threshold = float(finite.min()) if finite.size else float("nan")
        return cls(onsets, mags, threshold, max(int(min_gap), 1))


@dataclass
class OmoriFit:
    p: float
    amplitude_per_onset: list
    residual_norm: float
    iterations: int
    converged: bool
    onsets: list = field(default_factory=list)
    delta: float = 1.0
    p_stderr: float = float("nan")

    def as_dict(self):
        return {"p": self.p, "p_stderr": self.p_stderr, "amplitude_per_onset": list(self.amplitude_per_onset),
                "onsets": list(self.onsets), "delta": self.delta, "residual_norm": self.residual_norm,
                "iterations": self.iterations, "converged": self.converged}


@dataclass(frozen=True)
class GutenbergRichterFit:
    a: float
    b: float
    fit_range: tuple
    stderr_b: float
    stderr_a: float = float("nan")
    n_points: int = 0

    def as_dict(self):
        return {"a": self.a, "b": self.b, "stderr_a": self.stderr_a, "stderr_b": self.stderr_b,
                "fit_range": list(self.fit_range), "n_points": self.n_points}


def _threshold(x, threshold_sigmas, threshold):
    if threshold is not None:
        return float(threshold)
    sd = population_std(x)
    if not sd > 0:
        raise ZeroVariance("returns have zero variance")
    return float(threshold_sigmas) * sd


def event_counter(returns, threshold_sigmas: float = 3.0, threshold: Optional[float] = None) -> EventCounter:
    """Cumulative count of strict exceedances ``|r| > r_th`` before each bar.

    ``r_th`` is ``threshold_sigmas`` population standard deviations unless
    an absolute ``threshold`` is given.
    """
    x = as_array(returns)
    r_th = _threshold(x, threshold_sigmas, threshold)
    hits = (np.abs(x) > r_th).astype(np.int64)
    counts = np.concatenate(([0], np.cumsum(hits)))
    return EventCounter(np.arange(counts.size), counts, r_th)


def detect_onsets(returns, threshold_sigmas: float = 3.0, min_gap: int = 1,
                  threshold: Optional[float] = None) -> EventCatalog:
    """Greedy declustering of exceedances.

    An exceedance opens a new onset only when it comes at least ``min_gap``
    bars after the previous onset. The onset magnitude is the largest
    ``|r|`` in ``[onset, onset + min_gap)``.
    """
    x = as_array(returns)
    min_gap = int(min_gap)
    if min_gap < 1:
        raise ValueError("min_gap must be a positive integer")
    r_th = _threshold(x, threshold_sigmas, threshold)
    a = np.abs(x)
    onsets = []
    last = None
    for i in np.flatnonzero(a > r_th):
        if last is None or i - last >= min_gap:
            onsets.append(int(i))
            last = int(i)
    mags = [float(a[o:o + min_gap].max()) for o in onsets]
    return EventCatalog(np.asarray(onsets, dtype=np.int64), np.asarray(mags), r_th, min_gap)


def omori_model(t, onsets, amplitudes, p, delta=1.0):
    """Cumulative generalized Omori law ``sum_k c_k (t - t_k + delta)^(1-p)`` for ``t > t_k``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for t0, c in zip(onsets, amplitudes):
        m = t > t0
        out[m] += c * (t[m] - t0 + delta) ** (1.0 - p)
    return out


def fit_omori(counter, onsets, delta: float = 1.0, tol: float = 1e-10, max_iter: int = 500,
              p0: Optional[float] = None) -> OmoriFit:
    """Levenberg-Marquardt fit of a shared exponent ``p`` and per-onset amplitudes.

    ``counter`` is an :class:`EventCounter` (or a plain count array indexed
    by bar); ``onsets`` an :class:`EventCatalog` or a sequence of bar
    indices. Amplitudes are fitted on a log scale so they stay positive.
    Without ``p0`` the start is the best non-negative least-squares fit over
    a coarse grid of exponents.
    A run that hits ``max_iter`` is returned with ``converged=False``.
    """
    counts = counter.counts if isinstance(counter, EventCounter) else np.asarray(counter, dtype=float)
    on = np.asarray(onsets.onsets if isinstance(onsets, EventCatalog) else onsets, dtype=float)
    if on.size == 0:
        raise NoOnsets("no onsets to fit")
    t = np.arange(counts.size, dtype=float)
    if on.max() >= counts.size - 1:
        raise InsufficientData("counter does not extend past every onset")
    y = counts.astype(float)
    K = on.size
    masks = [t > t0 for t0 in on]
    logs = [np.log(np.where(m, t - t0 + delta, 1.0)) for m, t0 in zip(masks, on)]

    def basis(p):
        return [np.where(m, np.exp((1.0 - p) * lg), 0.0) for m, lg in zip(masks, logs)]

    def residual(params):
        p, cs = params[0], params[1:]
        b = basis(p)
        return sum(c * bk for c, bk in zip(cs, b)) - y

    def jacobian(params):
        p, cs = params[0], params[1:]
        b = basis(p)
        J = np.empty((t.size, K + 1))
        J[:, 0] = -sum(c * bk * lg for c, bk, lg in zip(cs, b, logs))
        for k in range(K):
            J[:, k + 1] = b[k]
        return J

    # start from the best non-negative amplitudes on a coarse grid of exponents
    if p0 is None:
        best = None
        for pg in np.linspace(-0.5, 0.95, 24):
            c, rn = optimize.nnls(np.column_stack(basis(pg)), y)
            if best is None or rn < best[0]:
                best = (rn, pg, c)
        _, p0, c0 = best
    else:
        c0, _ = optimize.nnls(np.column_stack(basis(p0)), y)
    floor = max(1e-6, 1e-2 * float(c0.max()))
    c0 = np.maximum(c0, floor)
    problem = NlsProblem(residual, np.concatenate(([p0], c0)), jacobian,
                         [None] + [(0.0, None)] * K)
    res = levenberg_marquardt(problem, tol=tol, max_iter=max_iter)
    p_se = float("nan")
    dof = t.size - (K + 1)
    if dof > 0:
        J = jacobian(res.parameters)
        try:
            cov = np.linalg.inv(J.T @ J) * (res.residual_norm ** 2 / dof)
            p_se = float(math.sqrt(max(cov[0, 0], 0.0)))
        except np.linalg.LinAlgError:
            pass
    return OmoriFit(float(res.parameters[0]), [float(c) for c in res.parameters[1:]],
                    res.residual_norm, res.iterations, res.converged,
                    [int(o) for o in on], float(delta), p_se)


def gr_counts(magnitudes, thresholds):
    """``N(M) = #{m >= M}`` for each threshold."""
    m = np.sort(np.asarray(magnitudes, dtype=float))
    th = np.asarray(thresholds, dtype=float)
    return m.size - np.searchsorted(m, th, side="left")


def fit_gr_counts(thresholds, counts, min_count: int = 1) -> GutenbergRichterFit:
    """Line through ``(M, log10 N)`` for thresholds with ``N >= min_count``; ``b = -slope``."""
    th = np.asarray(thresholds, dtype=float)
    n = np.asarray(counts, dtype=float)
    keep = n >= max(min_count, 1)
    if keep.sum() < 3:
        raise InsufficientData(f"only {int(keep.sum())} thresholds have at least {min_count} events")
    th, n = th[keep], n[keep]
    if np.ptp(th) == 0:
        raise DegenerateRegression("all magnitude thresholds are equal")
    reg = linear_fit(th, np.log10(n))
    return GutenbergRichterFit(reg.intercept, -reg.slope, (float(th.min()), float(th.max())),
                               reg.slope_stderr, reg.intercept_stderr, reg.n)


def fit_gutenberg_richter(returns, n_thresholds: int = 50, min_count: int = 10,
                          magnitude_range: Optional[tuple] = None) -> GutenbergRichterFit:
    """Gutenberg-Richter fit with magnitudes ``M = |r|``.

    Thresholds are ``n_thresholds`` evenly spaced values over
    ``magnitude_range`` (default: min to max of ``|r|``).
    """
    m = np.abs(as_array(returns))
    if m.size < max(min_count, 2):
        raise InsufficientData(f"{m.size} observations, need at least {min_count}")
    lo, hi = magnitude_range if magnitude_range is not None else (float(m.min()), float(m.max()))
    if not hi > lo:
        raise DegenerateRegression("magnitude range is empty")
    th = np.linspace(lo, hi, int(n_thresholds))
    return fit_gr_counts(th, gr_counts(m, th), min_count)


def omori_report_json(fit: OmoriFit) -> str:
    return json.dumps(fit.as_dict(), indent=2, sort_keys=True)
