"""Synthetic series with known ground truth.

=====================  ==========================================
family                 ground truth
=====================  ==========================================
gaussian-iid           zero excess kurtosis, zero autocorrelation
student-t-iid          excess kurtosis 6 / (dof - 4) for dof > 4
pareto-tail            CCDF exponent -alpha on each tail
garch-1-1              r^2 autocorrelation positive, r uncorrelated
random-walk-prices     persistence exponent 1/2; Taylor exponent 1 with drift
omori-process          counter following the cumulative Omori law
planted-lag-pair       volume/volatility peak at lag ``lag``
=====================  ==========================================
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameters
from .numerics import make_rng
from .quakes import omori_model
from .series import PriceSeries, ReturnSeries

FAMILIES = (
    "gaussian-iid",
    "student-t-iid",
    "pareto-tail",
    "garch-1-1",
    "random-walk-prices",
    "omori-process",
    "planted-lag-pair",
)

DEFAULTS = {
    "gaussian-iid": {"mu": 0.0, "sigma": 1.0},
    "student-t-iid": {"dof": 4.0, "scale": 1.0},
    "pareto-tail": {"alpha": 2.0, "scale": 1.0, "symmetric": 1.0},
    "garch-1-1": {"mu": 0.0, "omega": 1e-6, "alpha": 0.1, "beta": 0.85, "burn_in": 1000, "volume_noise": 0.3},
    "random-walk-prices": {"drift": 0.0, "sigma": 0.01, "binary": 0.0, "p0": 100.0},
    "omori-process": {"p": 0.8, "onsets": (1000, 5000), "amplitudes": (30.0, 20.0), "delta": 1.0,
                      "shock_magnitude": 100.0, "aftershock_magnitude": 5.0, "noise": 0.01},
    "planted-lag-pair": {"lag": 5, "sigma": 0.01},
}

START_EPOCH = 1_600_000_000


@dataclass
class GeneratorSpec:
    family: str
    length: int
    seed: int
    parameters: dict = field(default_factory=dict)
    cadence: int = 60

    def resolved(self) -> dict:
        if self.family not in FAMILIES:
            raise InvalidParameters(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        unknown = set(self.parameters) - set(DEFAULTS[self.family])
        if unknown:
            raise InvalidParameters(f"unknown parameters for {self.family}: {sorted(unknown)}")
        return {**DEFAULTS[self.family], **self.parameters}


def _check(cond, msg):
    if not cond:
        raise InvalidParameters(msg)


def returns_to_prices(returns, p0: float = 1.0, cadence: int = 60, volumes=None) -> PriceSeries:
    """Prices whose 1-bar log returns are ``returns`` (one more price than returns)."""
    r = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    lp = np.log(p0) + np.concatenate(([0.0], np.cumsum(r)))
    _check(np.all(np.abs(lp) < 700), "cumulative log return overflows a float price")
    return PriceSeries.from_prices(np.exp(lp), volumes, cadence, START_EPOCH)


def omori_counter(p, onsets, amplitudes, length: int, delta: float = 1.0,
                  seed: Optional[int] = None) -> np.ndarray:
    """Counter ``N(t)``, ``t = 0 .. length``, from the cumulative Omori law.

    Without a seed the exact model values are returned. With a seed each
    bar's increment is Poisson with the model's expected increment, so the
    expected counter equals the model.
    """
    t = np.arange(length + 1, dtype=float)
    model = omori_model(t, onsets, amplitudes, p, delta)
    if seed is None:
        return model
    inc = np.diff(model)
    _check(np.all(inc >= 0), "Omori counter must be non-decreasing (requires p < 1)")
    events = make_rng(seed).poisson(inc)
    return np.concatenate(([0], np.cumsum(events))).astype(float)


def _gaussian(n, rng, prm):
    _check(prm["sigma"] > 0, "sigma must be positive")
    return ReturnSeries(prm["mu"] + prm["sigma"] * rng.standard_normal(n))


def _student_t(n, rng, prm):
    dof = float(prm["dof"])
    _check(dof > 0 and prm["scale"] > 0, "dof and scale must be positive")
    z = rng.standard_normal(n)
    chi2 = rng.chisquare(dof, n)
    return ReturnSeries(prm["scale"] * z / np.sqrt(chi2 / dof))


def _pareto(n, rng, prm):
    alpha, scale = float(prm["alpha"]), float(prm["scale"])
    _check(alpha > 0 and scale > 0, "Pareto alpha and scale must be positive")
    u = 1.0 - rng.random(n)  # (0, 1]
    x = scale * u ** (-1.0 / alpha)
    if prm["symmetric"]:
        x = np.where(rng.random(n) < 0.5, -x, x)
    return ReturnSeries(x)


def garch_returns(n, rng, omega, alpha, beta, burn_in=1000):
    """GARCH(1,1) returns and conditional variances after discarding ``burn_in`` steps."""
    _check(omega > 0 and alpha >= 0 and beta >= 0, "GARCH needs omega > 0 and alpha, beta >= 0")
    _check(alpha + beta < 1, f"GARCH is nonstationary: alpha + beta = {alpha + beta} >= 1")
    total = n + int(burn_in)
    z = rng.standard_normal(total)
    r = np.empty(total)
    s2 = np.empty(total)
    var = omega / (1.0 - alpha - beta)
    prev_r2 = var
    for i in range(total):
        var = omega + alpha * prev_r2 + beta * var
        s2[i] = var
        r[i] = np.sqrt(var) * z[i]
        prev_r2 = r[i] * r[i]
    return r[burn_in:], s2[burn_in:]


def _garch(n, rng, prm, cadence):
    omega, alpha, beta = float(prm["omega"]), float(prm["alpha"]), float(prm["beta"])
    r, s2 = garch_returns(n - 1, rng, omega, alpha, beta, int(prm["burn_in"]))
    level = omega / (1.0 - alpha - beta)
    noise = np.exp(prm["volume_noise"] * rng.standard_normal(n))
    volumes = 1000.0 * np.concatenate(([1.0], s2 / level)) * noise
    return returns_to_prices(prm["mu"] + r, 100.0, cadence, volumes)


def _random_walk(n, rng, prm, cadence):
    _check(prm["sigma"] > 0 and prm["p0"] > 0, "sigma and p0 must be positive")
    if prm["binary"]:
        steps = np.where(rng.random(n - 1) < 0.5, -1.0, 1.0)
    else:
        steps = rng.standard_normal(n - 1)
    return returns_to_prices(prm["drift"] + prm["sigma"] * steps, prm["p0"], cadence)


def _omori(n, rng, prm):
    p = float(prm["p"])
    onsets = [int(o) for o in np.atleast_1d(prm["onsets"])]
    amps = [float(a) for a in np.atleast_1d(prm["amplitudes"])]
    _check(len(onsets) == len(amps), "one amplitude per onset")
    _check(p < 1, "the cumulative Omori counter only grows for p < 1")
    _check(all(0 <= o < n for o in onsets), "onsets must lie inside the series")
    expected = np.diff(omori_model(np.arange(n + 1.0), onsets, amps, p, prm["delta"]))
    x = prm["noise"] * rng.standard_normal(n)
    after = rng.random(n) < np.clip(expected, 0.0, 1.0)
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    x = np.where(after, signs * prm["aftershock_magnitude"], x)
    for o in onsets:
        x[o] = signs[o] * prm["shock_magnitude"]
    return ReturnSeries(x)


def _planted_lag(n, rng, prm, cadence):
    k = int(prm["lag"])
    _check(0 <= k < n // 4, "lag must be non-negative and well below the length")
    r = prm["sigma"] * rng.standard_normal(n - 1)
    proxy = (r - r.mean()) ** 2  # proxy[b - 1] belongs to bar b
    volumes = np.full(n, proxy.mean())
    volumes[1 + k:] = proxy[: n - 1 - k]
    return returns_to_prices(r, 100.0, cadence, volumes)


def generate(spec: GeneratorSpec):
    """Draw a series for ``spec``; return-based families give a ReturnSeries."""
    prm = spec.resolved()
    n = int(spec.length)
    _check(n >= 4, "length must be at least 4")
    rng = make_rng(spec.seed)
    fam = spec.family
    if fam == "gaussian-iid":
        return _gaussian(n, rng, prm)
    if fam == "student-t-iid":
        return _student_t(n, rng, prm)
    if fam == "pareto-tail":
        return _pareto(n, rng, prm)
    if fam == "garch-1-1":
        return _garch(n, rng, prm, spec.cadence)
    if fam == "random-walk-prices":
        return _random_walk(n, rng, prm, spec.cadence)
    if fam == "omori-process":
        return _omori(n, rng, prm)
    return _planted_lag(n, rng, prm, spec.cadence)


def generate_prices(spec: GeneratorSpec) -> PriceSeries:
    """Like :func:`generate`, but always a PriceSeries (returns are compounded)."""
    out = generate(spec)
    if isinstance(out, PriceSeries):
        return out
    return returns_to_prices(out, 1.0, spec.cadence)
