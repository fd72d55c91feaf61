import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from stylized_facts.errors import CheckpointOutOfRange, NonPositiveMeanReturn, SeriesTooShort, ZeroVariance
from stylized_facts.moments import (
    BootstrapConfig,
    excess_kurtosis,
    excess_kurtosis_bootstrap,
    fit_taylor_pairs,
    kurtosis_by_scale,
    running_second_moment,
    scale_moments,
    taylor_law_fit,
    variance_time_scaling,
)
from stylized_facts.series import log_returns
from stylized_facts.synth import GeneratorSpec, generate, generate_prices


def _py_excess(values):
    n = len(values)
    mu = sum(values) / n
    m2 = sum((v - mu) ** 2 for v in values) / n
    m4 = sum((v - mu) ** 4 for v in values) / n
    return m4 / (m2 * m2) - 3.0


@given(arrays(float, st.integers(4, 10_000), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=60, deadline=None)
def test_excess_kurtosis_formula(x):
    if np.std(x) < 1e-3:
        return
    assert excess_kurtosis(x) == pytest.approx(stats.kurtosis(x, fisher=True, bias=True), rel=1e-10, abs=1e-10)


def test_excess_kurtosis_zero_variance():
    with pytest.raises(ZeroVariance):
        excess_kurtosis(np.ones(5))
    assert issubclass(ZeroVariance, SeriesTooShort)


def test_running_second_moment_gaussian():
    x = generate(GeneratorSpec("gaussian-iid", 100_000, 8, {"sigma": 2.0})).values
    tr = running_second_moment(x, [1000, 10_000, 100_000])
    assert list(tr.lengths) == [1000, 10_000, 100_000]
    assert abs(tr.moment_values[-1] - 4.0) < 0.05 * 4.0


def test_running_second_moment_constant_and_guards():
    tr = running_second_moment(np.full(50, 0.3), [2, 10, 50])
    assert np.array_equal(tr.moment_values, [0, 0, 0])
    with pytest.raises(CheckpointOutOfRange):
        running_second_moment(np.ones(10), [1, 5])
    with pytest.raises(CheckpointOutOfRange):
        running_second_moment(np.ones(10), [5, 11])


@given(arrays(float, st.integers(3, 200), elements=st.floats(0.1, 100)), st.data())
@settings(max_examples=40, deadline=None)
def test_running_moment_consistent_with_returns(prices, data):
    r = log_returns(prices, 1).values
    L = data.draw(st.integers(2, r.size))
    tr = running_second_moment(r, [L])
    assert tr.moment_values[0] == np.var(r[:L])


def test_bootstrap_two_point_enumeration():
    x = np.array([-1.0, 1.0])
    # every resample of size 4 is an index pattern in {0,1}^4; drop constant ones
    vals = [_py_excess([x[i] for i in idx]) for idx in itertools.product((0, 1), repeat=4)
            if len(set(idx)) > 1]
    expected = sum(vals) / len(vals)  # -52/42
    assert expected == pytest.approx(-52 / 42, rel=1e-12)
    est = excess_kurtosis_bootstrap(x, 20_000, 4, seed=3)
    sd = np.std(vals)
    assert abs(est.mean - expected) < 4 * sd / np.sqrt(est.n_used)
    assert est.n_used / 20_000 == pytest.approx(14 / 16, abs=0.01)


def test_bootstrap_gaussian_brackets_zero():
    x = generate(GeneratorSpec("gaussian-iid", 100_000, 1)).values
    est = excess_kurtosis_bootstrap(x, 100, 100, seed=7)
    assert abs(est.mean) <= 2 * est.stderr
    # small-sample bias at n=100: E[g2] = -6/(n+1) for normal data
    means = [excess_kurtosis_bootstrap(x, 100, 100, seed=s).mean for s in range(40)]
    assert np.mean(means) == pytest.approx(-6 / 101, abs=0.04)


def test_bootstrap_reproducible_and_guards():
    x = generate(GeneratorSpec("student-t-iid", 5000, 1)).values
    a = excess_kurtosis_bootstrap(x, 50, 100, seed=5)
    b = excess_kurtosis_bootstrap(x, 50, 100, seed=5)
    assert a == b
    assert a != excess_kurtosis_bootstrap(x, 50, 100, seed=6)
    with pytest.raises(SeriesTooShort):
        excess_kurtosis_bootstrap(x[:1], 5, 100, seed=1)
    with pytest.raises(ZeroVariance):
        excess_kurtosis_bootstrap(np.full(200, 2.0), 10, 100, seed=1)


def test_kurtosis_by_scale_gaussian():
    s = generate_prices(GeneratorSpec("random-walk-prices", 50_000, 2))
    for st_ in kurtosis_by_scale(s, [1, 4, 16, 64], BootstrapConfig(100, 100, 3)):
        assert abs(st_.excess_kurtosis) <= 2 * st_.kurtosis_stderr
        assert st_.variance >= 0 and st_.tau >= 1


def test_kurtosis_by_scale_guard():
    s = generate_prices(GeneratorSpec("random-walk-prices", 100, 2))
    with pytest.raises(SeriesTooShort):
        kurtosis_by_scale(s, [99], BootstrapConfig(5, 10, 1))


def test_taylor_planted_pairs():
    tau = np.arange(1.0, 20.0)
    f = fit_taylor_pairs(tau, 2 * tau ** 0.916)
    assert abs(f.exponent - 0.916) < 1e-10
    assert abs(f.prefactor - 2) < 1e-10
    assert f.residual_norm < 1e-10


def test_taylor_drifted_walk():
    s = generate_prices(GeneratorSpec("random-walk-prices", 100_000, 4, {"drift": 0.002, "sigma": 0.01}))
    f = taylor_law_fit(s, [1, 2, 5, 10, 20, 50, 100])
    assert abs(f.exponent - 1.0) <= 0.05


def test_taylor_relabel_invariance():
    s = generate_prices(GeneratorSpec("random-walk-prices", 20_000, 4, {"drift": 0.002}))
    taus, means, variances = scale_moments(s, [1, 3, 9, 27])
    a = fit_taylor_pairs(means, variances, taus)
    b = fit_taylor_pairs(means, variances, taus * 60)
    assert a == b


def test_taylor_needs_positive_mean():
    s = generate_prices(GeneratorSpec("random-walk-prices", 5000, 4, {"drift": -0.01}))
    with pytest.raises(NonPositiveMeanReturn) as err:
        taylor_law_fit(s, [1, 2, 4])
    assert err.value.tau == 1


def test_variance_time_scaling():
    s = generate_prices(GeneratorSpec("random-walk-prices", 100_000, 5))
    g = variance_time_scaling(s, [1, 2, 5, 10, 20, 50])
    assert abs(g.exponent - 1.0) < 0.05
