"""Return densities, CCDFs and tail fits."""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import (
    DegenerateRegression,
    InsufficientTailData,
    SeriesTooShort,
    ZeroVariance,
)
from .numerics import linear_fit, simplex_minimize
from .series import as_array

BANDWIDTH_RULES = ("variance", "silverman")
BRANCHES = ("positive-tail", "negative-tail", "both")
MAX_GRID = 1 << 20

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    rule: str

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.grid))


@dataclass(frozen=True, eq=False)
class CcdfCurve:
    """Empirical ``Pr(X > x)`` on one branch; zero-survival points are dropped."""

    thresholds: np.ndarray
    survival: np.ndarray
    branch: str
    n: int


@dataclass(frozen=True)
class PowerLawFit:
    """Result of a straight-line fit in log-log coordinates.

    ``exponent`` is the fitted slope, ``prefactor`` the back-transformed
    intercept, so that ``y ~ prefactor * x ** exponent`` over ``fit_range``.
    """

    exponent: float
    prefactor: float
    exponent_stderr: float
    fit_range: tuple
    residual_norm: float
    n_points: int = 0
    r_squared: float = float("nan")

    def as_dict(self):
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "exponent_stderr": self.exponent_stderr,
            "fit_range": list(self.fit_range),
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "r_squared": self.r_squared,
        }


@dataclass(frozen=True)
class DistributionFit:
    family: str
    location: float
    scale: float
    log_likelihood: float
    dof: Optional[float] = None

    def as_dict(self):
        d = {"family": self.family, "location": self.location, "scale": self.scale,
             "log_likelihood": self.log_likelihood}
        if self.dof is not None:
            d["dof"] = self.dof
        return d


def power_law_fit(x, y) -> PowerLawFit:
    """Least-squares line through ``(ln x, ln y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power_law_fit needs strictly positive coordinates")
    if np.ptp(x) == 0:
        raise DegenerateRegression("all abscissae are equal")
    reg = linear_fit(np.log(x), np.log(y))
    return PowerLawFit(reg.slope, float(np.exp(reg.intercept)), reg.slope_stderr,
                       (float(x.min()), float(x.max())), reg.residual_norm, reg.n, reg.r_squared)


# ---------------------------------------------------------------------------
# Kernel density
# ---------------------------------------------------------------------------


def bandwidth(x, rule: str = "variance") -> float:
    """Kernel window for ``N`` points with population variance ``var``.

    ``"variance"`` is ``1.06 * var * N**-0.2``; ``"silverman"`` is the usual
    ``1.06 * std * N**-0.2``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    var = float(np.mean((x - x.mean()) ** 2))
    if rule == "variance":
        return 1.06 * var * n ** -0.2
    if rule == "silverman":
        return 1.06 * math.sqrt(var) * n ** -0.2
    raise ValueError(f"unknown bandwidth rule {rule!r}; expected one of {BANDWIDTH_RULES}")


def epanechnikov_density(data, points, h: float) -> np.ndarray:
    """Evaluate ``(1 / (N h)) sum K((x - r_i) / h)`` with ``K(u) = 0.75 (1 - u^2)``."""
    r = np.sort(np.asarray(data, dtype=float))
    x = np.asarray(points, dtype=float)
    n = r.size
    center = float(np.mean(r))
    if n * x.size <= 4_000_000:
        out = np.empty(x.size)
        step = max(1, 4_000_000 // max(n, 1))
        for i in range(0, x.size, step):
            u = (x[i:i + step, None] - r[None, :]) / h
            k = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
            out[i:i + step] = k.sum(axis=1)
        return out / (n * h)
    # large inputs: windowed sums from prefix sums of the centered, scaled data
    u = (r - center) / h
    g = (x - center) / h
    c1 = np.concatenate(([0.0], np.cumsum(u)))
    c2 = np.concatenate(([0.0], np.cumsum(u * u)))
    lo = np.searchsorted(u, g - 1.0, side="left")
    hi = np.searchsorted(u, g + 1.0, side="right")
    cnt = (hi - lo).astype(float)
    s1 = c1[hi] - c1[lo]
    s2 = c2[hi] - c2[lo]
    ksum = 0.75 * (cnt - (g * g * cnt - 2.0 * g * s1 + s2))
    return np.maximum(ksum, 0.0) / (n * h)


def kde_epanechnikov(returns, grid_size: Optional[int] = None, bandwidth_value: Optional[float] = None,
                     rule: str = "variance") -> DensityEstimate:
    """Epanechnikov kernel density on a grid spanning ``[min - h, max + h]``.

    When ``grid_size`` is None the grid is made fine enough (spacing at most
    ``h / 10``, at least 512 points) for the trapezoid rule to integrate the
    estimate to one.
    """
    x = as_array(returns)
    if x.size < 2:
        raise SeriesTooShort("density estimation needs at least two returns")
    if np.ptp(x) == 0:
        raise ZeroVariance("returns have zero variance")
    if bandwidth_value is None:
        h = bandwidth(x, rule)
        used = rule
    else:
        h = float(bandwidth_value)
        used = "explicit"
        if not h > 0:
            raise ValueError("bandwidth must be positive")
    lo, hi = float(x.min()) - h, float(x.max()) + h
    if grid_size is None:
        grid_size = max(512, int(math.ceil(10.0 * (hi - lo) / h)) + 1)
        if grid_size > MAX_GRID:
            warnings.warn(f"bandwidth {h:.3g} is tiny relative to the data span; "
                          f"grid capped at {MAX_GRID} points", RuntimeWarning)
            grid_size = MAX_GRID
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    grid = np.linspace(lo, hi, int(grid_size))
    return DensityEstimate(grid, epanechnikov_density(x, grid, h), h, used)


# ---------------------------------------------------------------------------
# CCDF and tail fits
# ---------------------------------------------------------------------------


def _branch_values(x, branch):
    if branch == "positive-tail":
        return x[x > 0]
    if branch == "negative-tail":
        return -x[x < 0]
    if branch == "both":
        a = np.abs(x)
        return a[a > 0]
    raise ValueError(f"unknown branch {branch!r}; expected one of {BRANCHES}")


def ccdf(returns, branch: str = "positive-tail", min_count: int = 10) -> CcdfCurve:
    """Empirical survival ``Pr(X > x)`` evaluated at each distinct branch value.

    The negative tail is built from ``-r`` for ``r < 0``. The largest value
    has zero survival and is omitted, so every retained point is plottable
    on log axes.
    """
    x = as_array(returns)
    v = np.sort(_branch_values(x, branch))
    n = v.size
    if n < max(int(min_count), 1):
        raise InsufficientTailData(f"{n} observations on the {branch} branch (need {min_count})")
    thr = np.unique(v)
    above = n - np.searchsorted(v, thr, side="right")
    keep = above > 0
    return CcdfCurve(thr[keep], above[keep] / n, branch, n)


def fit_tail_exponent(curve: CcdfCurve, tail_fraction: float = 0.1, min_points: int = 10) -> PowerLawFit:
    """Log-log regression over the largest ``tail_fraction`` of thresholds."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    m = curve.thresholds.size
    k = int(math.ceil(tail_fraction * m))
    if k < min_points:
        raise InsufficientTailData(f"{k} points in the fitted tail (need {min_points})")
    xs = curve.thresholds[m - k:]
    ys = curve.survival[m - k:]
    if np.ptp(xs) == 0:
        raise DegenerateRegression("all tail thresholds are equal")
    return power_law_fit(xs, ys)


# ---------------------------------------------------------------------------
# Parametric fits
# ---------------------------------------------------------------------------


def fit_gaussian(returns) -> DistributionFit:
    x = as_array(returns)
    if x.size < 2:
        raise SeriesTooShort("Gaussian fit needs at least two returns")
    mu = float(x.mean())
    var = float(np.mean((x - mu) ** 2))
    if not var > 0:
        raise ZeroVariance("returns have zero variance")
    ll = -0.5 * x.size * (math.log(2.0 * math.pi * var) + 1.0)
    return DistributionFit("gaussian", mu, math.sqrt(var), ll)


DOF_LOW, DOF_HIGH = 2.0, 200.0


def _dof(z):
    return DOF_LOW + (DOF_HIGH - DOF_LOW) / (1.0 + math.exp(-z))


def _dof_inverse(nu):
    f = (nu - DOF_LOW) / (DOF_HIGH - DOF_LOW)
    return math.log(f / (1.0 - f))


def student_t_loglik(x, loc, scale, dof) -> float:
    z = (np.asarray(x, dtype=float) - loc) / scale
    n = z.size
    const = gammaln(0.5 * (dof + 1)) - gammaln(0.5 * dof) - 0.5 * math.log(dof * math.pi) - math.log(scale)
    return float(n * const - 0.5 * (dof + 1) * np.sum(np.log1p(z * z / dof)))


def fit_student_t(returns, min_length: int = 50) -> DistributionFit:
    """Maximum-likelihood Student-t fit by Nelder-Mead.

    The degrees of freedom are mapped onto (2, 200) through a logistic
    transform so the simplex works on an unconstrained variable.
    """
    x = as_array(returns)
    if x.size < min_length:
        raise SeriesTooShort(f"Student-t fit needs at least {min_length} returns, got {x.size}")
    sd = float(np.std(x))
    if not sd > 0:
        raise ZeroVariance("returns have zero variance")
    d = x - x.mean()
    ek = float(np.mean(d ** 4) / np.mean(d ** 2) ** 2 - 3.0)
    nu0 = min(max(4.0 + 6.0 / ek, 2.5), 150.0) if ek > 0 else 150.0
    scale0 = sd * math.sqrt((nu0 - 2.0) / nu0)
    loc0 = float(np.median(x))
    n = x.size

    def objective(theta):
        loc, log_scale, z = theta
        if abs(z) > 700:
            return np.inf
        return -student_t_loglik(x, loc * sd, math.exp(log_scale) * sd, _dof(z)) / n

    start = np.array([loc0 / sd, math.log(scale0 / sd), _dof_inverse(nu0)])
    res = simplex_minimize(objective, start, xatol=1e-7, fatol=1e-12, max_iter=5000)
    loc, log_scale, z = res.x
    scale = math.exp(log_scale) * sd
    nu = _dof(z)
    return DistributionFit("student-t", float(loc * sd), scale,
                           student_t_loglik(x, loc * sd, scale, nu), nu)


def export_curve_csv(path, xs, ys, header=("grid", "value")):
    """Two-column CSV for plotting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for a, b in zip(np.asarray(xs), np.asarray(ys)):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
