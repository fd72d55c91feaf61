"""Moment convergence, bootstrap kurtosis across scales and Taylor's law."""

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .density import PowerLawFit, power_law_fit
from .errors import (
    CheckpointOutOfRange,
    NonPositiveMeanReturn,
    SeriesTooShort,
    ZeroVariance,
)
from .numerics import make_rng
from .series import as_array, log_returns


@dataclass(frozen=True, eq=False)
class MomentTrace:
    lengths: np.ndarray
    moment_values: np.ndarray


@dataclass(frozen=True)
class ScaleStatistics:
    tau: int
    mean_return: float
    variance: float
    excess_kurtosis: float
    kurtosis_stderr: float

    def as_row(self):
        return (self.tau, self.mean_return, self.variance, self.excess_kurtosis, self.kurtosis_stderr)


class BootstrapEstimate(NamedTuple):
    mean: float
    stderr: float
    n_used: int = 0


@dataclass(frozen=True)
class BootstrapConfig:
    n_samples: int = 100
    sample_size: int = 100
    seed: int = 0


def excess_kurtosis(x) -> float:
    """``<((x - mu) / sigma)^4> - 3`` with population moments."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        raise ZeroVariance("kurtosis of a constant series is undefined")
    return float(np.mean(d ** 4) / (m2 * m2) - 3.0)


def running_second_moment(returns, checkpoints: Sequence[int]) -> MomentTrace:
    """Population second central moment of the first ``L`` returns for each checkpoint."""
    x = as_array(returns)
    lengths = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if lengths.size == 0:
        raise CheckpointOutOfRange("no checkpoints given")
    if lengths[0] < 2 or lengths[-1] > x.size:
        raise CheckpointOutOfRange(f"checkpoints must lie in [2, {x.size}]")
    values = np.array([np.var(x[:L]) for L in lengths])
    # constant prefixes are exactly zero, not mean-rounding noise
    flat = np.maximum.accumulate(x)[lengths - 1] == np.minimum.accumulate(x)[lengths - 1]
    values[flat] = 0.0
    return MomentTrace(lengths, values)


def default_checkpoints(n: int, points: int = 50) -> list:
    """Log-spaced checkpoints from 10 (or 2) to ``n``."""
    if n < 2:
        raise SeriesTooShort("need at least two returns")
    lo = min(10, n)
    return sorted(set(int(round(v)) for v in np.geomspace(max(lo, 2), n, points)))


def excess_kurtosis_bootstrap(returns, n_samples: int = 100, sample_size: int = 100,
                              seed: int = 0, stream: tuple = ()) -> BootstrapEstimate:
    """Mean and spread of excess kurtosis over fixed-size resamples.

    Subsample ``i`` draws ``sample_size`` points with replacement using its
    own stream ``make_rng(seed, *stream, i)``, so the result does not depend
    on evaluation order. Resamples with zero variance have no kurtosis and
    are skipped; ``n_used`` counts the rest. Resampling is with replacement,
    so ``sample_size`` may exceed the series length.
    """
    x = as_array(returns)
    if n_samples < 1 or sample_size < 1:
        raise ValueError("n_samples and sample_size must be positive")
    if x.size < 2:
        raise SeriesTooShort("bootstrap needs at least two observations")
    vals = []
    for i in range(int(n_samples)):
        rng = make_rng(seed, *stream, i)
        sub = x[rng.integers(0, x.size, size=int(sample_size))]
        try:
            vals.append(excess_kurtosis(sub))
        except ZeroVariance:
            continue
    if not vals:
        raise ZeroVariance("every bootstrap subsample had zero variance")
    v = np.asarray(vals)
    return BootstrapEstimate(float(v.mean()), float(v.std()), v.size)


def kurtosis_by_scale(series, taus: Sequence[int], config: BootstrapConfig = BootstrapConfig()):
    """Mean, variance and bootstrap excess kurtosis of overlapping ``tau``-bar returns."""
    n = len(series.prices) if hasattr(series, "prices") else len(series)
    taus = [int(t) for t in taus]
    if not taus or min(taus) < 1:
        raise ValueError("taus must be positive integers")
    if max(taus) >= n - 1:
        raise SeriesTooShort(f"max tau {max(taus)} must be below series length - 1 ({n - 1})")
    out = []
    for tau in taus:
        r = log_returns(series, tau).values
        est = excess_kurtosis_bootstrap(r, config.n_samples, config.sample_size, config.seed, (tau,))
        out.append(ScaleStatistics(tau, float(r.mean()), float(np.var(r)), est.mean, est.stderr))
    return out


def scale_moments(series, taus: Sequence[int]):
    """``(tau, mean, variance)`` arrays for overlapping returns at each scale."""
    taus = np.asarray([int(t) for t in taus], dtype=np.int64)
    means = np.empty(taus.size)
    variances = np.empty(taus.size)
    for i, tau in enumerate(taus):
        r = log_returns(series, int(tau)).values
        means[i] = r.mean()
        variances[i] = np.var(r)
    return taus, means, variances


def fit_taylor_pairs(means, variances, taus=None) -> PowerLawFit:
    """Fit ``variance = prefactor * mean ** exponent`` in log-log space."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if means.size < 3:
        raise SeriesTooShort("Taylor's law needs at least three scales")
    bad = np.flatnonzero(~(means > 0))
    if bad.size:
        raise NonPositiveMeanReturn(int(taus[bad[0]]) if taus is not None else int(bad[0]))
    if np.any(~(variances > 0)):
        raise ZeroVariance("variance is zero at some scale")
    return power_law_fit(means, variances)


def taylor_law_fit(series, taus: Sequence[int]) -> PowerLawFit:
    """Taylor exponent from the variance-versus-mean relation across scales."""
    t, means, variances = scale_moments(series, taus)
    return fit_taylor_pairs(means, variances, t)


def variance_time_scaling(series, taus: Sequence[int]) -> PowerLawFit:
    """Exponent of ``variance ~ tau ** gamma``; a separate regression from Taylor's."""
    t, _, variances = scale_moments(series, taus)
    if t.size < 3:
        raise SeriesTooShort("need at least three scales")
    return power_law_fit(t.astype(float), variances)


def export_scale_statistics(path, stats):
    with open(path, "w") as fh:
        fh.write("tau,mean,variance,excess_kurtosis,stderr\n")
        for s in stats:
            fh.write(f"{s.tau},{s.mean_return!r},{s.variance!r},{s.excess_kurtosis!r},{s.kurtosis_stderr!r}\n")
