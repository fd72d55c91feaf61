"""Shared numerical kernels.

Linear regression with standard errors, a Levenberg-Marquardt solver, a
Nelder-Mead wrapper, seedable RNG streams and a radix-2 real FFT.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateAbscissae,
    LengthMismatch,
    NonFiniteResidual,
    NotPowerOfTwo,
    OptimizerDidNotConverge,
    SingularNormalEquations,
)

# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional stream key.

    ``make_rng(s, i)`` is the ``i``-th child of ``SeedSequence(s)``, so
    independent tasks get distinct, schedule-independent streams.
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Linear regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r_squared: float
    n: int
    residual_norm: float


def linear_fit(xs, ys) -> RegressionResult:
    """Ordinary least squares ``y = slope * x + intercept``.

    Standard errors use the residual variance with ``n - 2`` degrees of
    freedom; they are NaN when ``n == 2``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"xs and ys must be 1-d of equal length, got {x.shape} and {y.shape}")
    n = x.size
    if n < 2:
        raise LengthMismatch("linear_fit needs at least two points")
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0 or np.ptp(x) == 0:
        raise DegenerateAbscissae("all abscissae are equal")
    slope = float(dx @ (y - ym)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ssr = float(resid @ resid)
    dy = y - ym
    sst = float(dy @ dy)
    if sst > 0:
        r2 = min(1.0, max(0.0, 1.0 - ssr / sst))
    else:
        r2 = 1.0
    if n > 2:
        s2 = ssr / (n - 2)
        slope_se = float(np.sqrt(s2 / sxx))
        intercept_se = float(np.sqrt(s2 * (1.0 / n + xm * xm / sxx)))
    else:
        slope_se = intercept_se = float("nan")
    return RegressionResult(slope, intercept, slope_se, intercept_se, r2, n, float(np.sqrt(ssr)))


# ---------------------------------------------------------------------------
# FFT
# ---------------------------------------------------------------------------


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


@lru_cache(maxsize=64)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=64)
def _twiddles(size: int) -> np.ndarray:
    w = np.exp(-2j * np.pi * np.arange(size // 2) / size)
    w.setflags(write=False)
    return w


def _fft_complex(z: np.ndarray) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT (forward, unnormalized)."""
    n = z.size
    x = z[_bit_reverse(n)].astype(complex)
    size = 2
    while size <= n:
        half = size // 2
        blocks = x.reshape(-1, size)
        even = blocks[:, :half]
        odd = blocks[:, half:] * _twiddles(size)
        x = np.concatenate((even + odd, even - odd), axis=1).ravel()
        size *= 2
    return x


def _ifft_complex(z: np.ndarray) -> np.ndarray:
    return np.conj(_fft_complex(np.conj(z))) / z.size


def fft_real(signal, padded_length: int) -> np.ndarray:
    """Forward transform of a real signal zero-padded to ``padded_length``.

    Returns the ``padded_length // 2 + 1`` non-negative frequency bins. The
    real input is packed into a half-length complex sequence, transformed
    and split back into the real spectrum.
    """
    x = np.asarray(signal, dtype=float)
    L = int(padded_length)
    if not is_power_of_two(L):
        raise NotPowerOfTwo(f"padded_length must be a power of two, got {padded_length}")
    if L < x.size:
        raise ValueError(f"padded_length {L} is shorter than the signal ({x.size})")
    if L == 1:
        return x.astype(complex) if x.size else np.zeros(1, dtype=complex)
    buf = np.zeros(L)
    buf[: x.size] = x
    M = L // 2
    Z = _fft_complex(buf[0::2] + 1j * buf[1::2])
    Zc = np.conj(np.append(Z, Z[0])[::-1])  # conj(Z[M - k]) for k = 0..M
    Zk = np.append(Z, Z[0])
    even = 0.5 * (Zk + Zc)
    odd = -0.5j * (Zk - Zc)
    w = np.exp(-2j * np.pi * np.arange(M + 1) / L)
    return even + w * odd


def ifft_real(spectrum, padded_length: int) -> np.ndarray:
    """Inverse of :func:`fft_real`; returns the real signal of ``padded_length``."""
    X = np.asarray(spectrum, dtype=complex)
    L = int(padded_length)
    if not is_power_of_two(L):
        raise NotPowerOfTwo(f"padded_length must be a power of two, got {padded_length}")
    if X.size != L // 2 + 1:
        raise ValueError(f"spectrum must have {L // 2 + 1} bins, got {X.size}")
    if L == 1:
        return X.real.copy()
    M = L // 2
    Xc = np.conj(X[::-1])  # conj(X[M - k])
    even = 0.5 * (X + Xc)[:M]
    w = np.exp(2j * np.pi * np.arange(M + 1) / L)
    odd = (0.5 * (X - Xc) * w)[:M]
    z = _ifft_complex(even + 1j * odd)
    out = np.empty(L)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


# ---------------------------------------------------------------------------
# Levenberg-Marquardt
# ---------------------------------------------------------------------------

Bound = Optional[tuple]


def _to_internal(x, bounds):
    u = np.array(x, dtype=float)
    for i, b in enumerate(bounds):
        if b is None:
            continue
        lo, hi = b
        lo_inf = lo is None or np.isneginf(lo)
        hi_inf = hi is None or np.isposinf(hi)
        if lo_inf and hi_inf:
            continue
        if not lo_inf and not hi_inf:
            if not lo < x[i] < hi:
                raise ValueError(f"initial parameter {i} = {x[i]} outside ({lo}, {hi})")
            f = (x[i] - lo) / (hi - lo)
            u[i] = np.log(f / (1.0 - f))
        elif not lo_inf:
            if not x[i] > lo:
                raise ValueError(f"initial parameter {i} = {x[i]} not above {lo}")
            u[i] = np.log(x[i] - lo)
        else:
            if not x[i] < hi:
                raise ValueError(f"initial parameter {i} = {x[i]} not below {hi}")
            u[i] = np.log(hi - x[i])
    return u


def _from_internal(u, bounds):
    """Map internal to external parameters; also returns dx/du."""
    x = np.array(u, dtype=float)
    d = np.ones_like(x)
    for i, b in enumerate(bounds):
        if b is None:
            continue
        lo, hi = b
        lo_inf = lo is None or np.isneginf(lo)
        hi_inf = hi is None or np.isposinf(hi)
        if lo_inf and hi_inf:
            continue
        if not lo_inf and not hi_inf:
            s = 0.5 * (1.0 + np.tanh(0.5 * u[i]))
            x[i] = lo + (hi - lo) * s
            d[i] = (hi - lo) * s * (1.0 - s)
        elif not lo_inf:
            e = np.exp(u[i])
            x[i] = lo + e
            d[i] = e
        else:
            e = np.exp(u[i])
            x[i] = hi - e
            d[i] = -e
    return x, d


@dataclass
class NlsProblem:
    """Nonlinear least-squares problem ``min ||residual(x)||^2``.

    ``jacobian`` may be None, in which case forward differences are used.
    ``bounds`` is a per-parameter list of ``(lo, hi)`` or None; bounded
    parameters are handled through a smooth log/logit change of variables.
    """

    residual: Callable[[np.ndarray], np.ndarray]
    initial_parameters: Sequence[float]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bounds: Optional[Sequence[Bound]] = None


@dataclass
class LMResult:
    parameters: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    damping: float = 0.0


def _forward_jacobian(fun, u, r0):
    J = np.empty((r0.size, u.size))
    for j in range(u.size):
        h = 1e-7 * max(1.0, abs(u[j]))
        up = u.copy()
        up[j] += h
        J[:, j] = (fun(up) - r0) / h
    return J


def levenberg_marquardt(problem: NlsProblem, tol: float = 1e-10, max_iter: int = 500,
                        initial_damping: float = 1e-3) -> LMResult:
    """Minimize a sum of squared residuals by damped Gauss-Newton steps.

    Damping is multiplied by 10 on a rejected step and divided by 10 on an
    accepted one. The run is converged when an accepted step reduces the
    squared residual by less than ``tol`` relative to its previous value,
    or when a trial step leaves it unchanged to that precision.

    ``history`` holds the squared residual after every accepted step and is
    non-increasing by construction.
    """
    n_par = len(problem.initial_parameters)
    bounds = list(problem.bounds) if problem.bounds is not None else [None] * n_par
    if len(bounds) != n_par:
        raise ValueError("bounds must have one entry per parameter")

    def res_u(u):
        x, _ = _from_internal(u, bounds)
        return np.asarray(problem.residual(x), dtype=float)

    def jac_u(u, r):
        x, d = _from_internal(u, bounds)
        if problem.jacobian is None:
            return _forward_jacobian(res_u, u, r)
        J = np.asarray(problem.jacobian(x), dtype=float)
        if J.shape != (r.size, n_par):
            raise ValueError(f"jacobian shape {J.shape} does not match ({r.size}, {n_par})")
        return J * d

    u = _to_internal(np.asarray(problem.initial_parameters, dtype=float), bounds)
    r = res_u(u)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residual is not finite at the initial parameters")
    cost = float(r @ r)
    history = [cost]
    lam = float(initial_damping)
    converged = False
    it = 0
    while it < max_iter:
        if cost == 0.0:
            converged = True
            break
        it += 1
        J = jac_u(u, r)
        A = J.T @ J
        g = J.T @ r
        scale = np.diag(A).copy()
        floor = 1e-12 * max(float(scale.max()), 1e-300)
        scale = np.maximum(scale, floor)
        stalled = False
        while True:
            try:
                delta = np.linalg.solve(A + lam * np.diag(scale), -g)
                ok = np.all(np.isfinite(delta))
            except np.linalg.LinAlgError:
                ok = False
            if not ok:
                lam *= 10.0
                if lam > 1e10:
                    raise SingularNormalEquations(
                        f"normal equations singular up to damping {lam:.1e}")
                continue
            u_new = u + delta
            r_new = res_u(u_new)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                rel = (cost - cost_new) / cost
                u, r, cost = u_new, r_new, cost_new
                history.append(cost)
                lam = max(lam / 10.0, 1e-20)
                if rel < tol:
                    converged = True
                break
            if np.isfinite(cost_new) and cost_new - cost <= tol * cost:
                converged = True
                break
            lam *= 10.0
            if lam > 1e10:
                stalled = True
                break
        if converged or stalled:
            break
    x, _ = _from_internal(u, bounds)
    return LMResult(x, float(np.sqrt(cost)), it, converged, history, lam)


# ---------------------------------------------------------------------------
# Derivative-free simplex
# ---------------------------------------------------------------------------


def simplex_minimize(fun, x0, xatol=1e-8, fatol=1e-10, max_iter=4000):
    """Nelder-Mead minimization; raises :class:`OptimizerDidNotConverge` on failure."""
    res = optimize.minimize(
        fun, np.asarray(x0, dtype=float), method="Nelder-Mead",
        options={"xatol": xatol, "fatol": fatol, "maxiter": max_iter,
                 "maxfev": 2 * max_iter, "adaptive": True},
    )
    if not res.success or not np.isfinite(res.fun):
        raise OptimizerDidNotConverge(int(res.nit), float(res.fun), str(res.message))
    return res
