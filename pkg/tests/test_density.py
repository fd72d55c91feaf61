import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stylized_facts.density import (
    bandwidth,
    ccdf,
    epanechnikov_density,
    fit_gaussian,
    fit_student_t,
    fit_tail_exponent,
    kde_epanechnikov,
    power_law_fit,
    student_t_loglik,
)
from stylized_facts.errors import (
    DegenerateRegression,
    InsufficientTailData,
    SeriesTooShort,
    ZeroVariance,
)
from stylized_facts.density import CcdfCurve
from stylized_facts.synth import GeneratorSpec, generate

returns_st = arrays(float, st.integers(2, 300), elements=st.floats(-50, 50))


def _kernel_sum(data, x, h):
    u = (x[:, None] - data[None, :]) / h
    k = np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0)
    return k.sum(axis=1) / (data.size * h)


def test_bandwidth_rule_value():
    x = np.tile([-1.0, 1.0], 50)  # population variance 1, N=100
    assert bandwidth(x, "variance") == pytest.approx(1.06 * 100 ** -0.2, rel=1e-12)
    assert bandwidth(x, "variance") == pytest.approx(0.4220, abs=5e-4)
    y = 2 * x
    assert bandwidth(y, "variance") == pytest.approx(4 * 1.06 * 100 ** -0.2)
    assert bandwidth(y, "silverman") == pytest.approx(2 * 1.06 * 100 ** -0.2)
    with pytest.raises(ValueError):
        bandwidth(x, "scott")


def test_kernel_hand_values():
    d = epanechnikov_density([-1.0, 1.0], [-1.0, 0.0, 1.0, 2.5], 1.0)
    assert np.allclose(d, [0.375, 0.0, 0.375, 0.0], atol=1e-15)


def test_kde_records_rule():
    x = generate(GeneratorSpec("gaussian-iid", 1000, 1)).values
    assert kde_epanechnikov(x).rule == "variance"
    assert kde_epanechnikov(x, rule="silverman").rule == "silverman"
    est = kde_epanechnikov(x, bandwidth_value=0.3, grid_size=101)
    assert est.rule == "explicit" and est.bandwidth == 0.3 and est.grid.size == 101
    assert est.grid[0] == pytest.approx(x.min() - 0.3) and est.grid[-1] == pytest.approx(x.max() + 0.3)


def test_kde_guards():
    with pytest.raises(SeriesTooShort):
        kde_epanechnikov(np.array([1.0]))
    with pytest.raises(ZeroVariance):
        kde_epanechnikov(np.array([1.0, 1.0, 1.0]))


def test_kde_matches_kernel_sum_large():
    x = generate(GeneratorSpec("student-t-iid", 20_000, 4)).values
    est = kde_epanechnikov(x, grid_size=400, rule="silverman")
    ref = _kernel_sum(x, est.grid, est.bandwidth)
    assert np.allclose(est.density, ref, rtol=1e-8, atol=1e-10)


@given(returns_st, st.sampled_from(["variance", "silverman"]))
@settings(max_examples=60, deadline=None)
def test_kde_integrates_to_one(x, rule):
    if np.std(x) < 1e-3:
        return
    est = kde_epanechnikov(x, rule=rule)
    assert np.all(est.density >= 0)
    assert 0.99 <= est.integral() <= 1.01
    assert np.allclose(est.density, _kernel_sum(x, est.grid, est.bandwidth), rtol=1e-9, atol=1e-12)


@given(returns_st, st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_kde_translation_equivariant(x, c):
    if np.std(x) < 1e-2:
        return
    a = kde_epanechnikov(x, grid_size=256)
    b = kde_epanechnikov(x + c, grid_size=256)
    assert np.allclose(b.grid, a.grid + c, rtol=0, atol=1e-12)
    assert np.allclose(b.density, a.density, rtol=0, atol=1e-12 * max(1.0, a.density.max()) * 100)
    assert b.bandwidth == pytest.approx(a.bandwidth, rel=1e-9)


def test_ccdf_small_example():
    c = ccdf(np.array([1.0, 2.0, 3.0, 4.0]), "positive-tail", min_count=1)
    assert c.survival[list(c.thresholds).index(2.0)] == 0.5
    assert list(c.thresholds) == [1.0, 2.0, 3.0]
    assert list(c.survival) == [0.75, 0.5, 0.25]


def test_ccdf_guards():
    with pytest.raises(InsufficientTailData):
        ccdf(-np.arange(1.0, 30.0), "positive-tail")
    with pytest.raises(InsufficientTailData):
        ccdf(np.arange(1.0, 5.0), "positive-tail")  # fewer than 10 observations by default
    with pytest.raises(ValueError):
        ccdf(np.arange(1.0, 30.0), "up")


def test_ccdf_negative_branch_mirrors():
    x = generate(GeneratorSpec("gaussian-iid", 500, 2)).values
    a = ccdf(x, "negative-tail")
    b = ccdf(-x, "positive-tail")
    assert np.array_equal(a.thresholds, b.thresholds) and np.array_equal(a.survival, b.survival)


@given(arrays(float, st.integers(10, 1000), elements=st.integers(-20, 20).map(float)),
       st.sampled_from(["positive-tail", "negative-tail", "both"]))
@settings(max_examples=80, deadline=None)
def test_ccdf_brute_force(x, branch):
    vals = {"positive-tail": x[x > 0], "negative-tail": -x[x < 0], "both": np.abs(x)[x != 0]}[branch]
    if vals.size < 1:
        return
    c = ccdf(x, branch, min_count=1)
    for t, s in zip(c.thresholds, c.survival):
        assert s == np.count_nonzero(vals > t) / vals.size
    assert np.all(np.diff(c.survival) <= 0)
    assert np.all(c.survival > 0) and (c.survival.size == 0 or c.survival[0] <= 1)


def test_tail_fit_exact_power_law():
    x = np.geomspace(1, 100, 50)
    curve = CcdfCurve(x, x ** -3.0, "positive-tail", 50)
    f = fit_tail_exponent(curve, tail_fraction=1.0)
    assert abs(f.exponent + 3) < 1e-10
    assert f.fit_range[0] < f.fit_range[1]
    assert math.isfinite(f.exponent_stderr)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_tail_fit_pareto(alpha):
    x = generate(GeneratorSpec("pareto-tail", 100_000, 11, {"alpha": alpha})).values
    for branch in ("positive-tail", "negative-tail"):
        f = fit_tail_exponent(ccdf(x, branch), 0.1)
        assert abs(f.exponent + alpha) <= 0.1 * alpha


def test_tail_fit_guards():
    curve = CcdfCurve(np.full(20, 2.0), np.linspace(1, 0.1, 20), "positive-tail", 20)
    with pytest.raises(DegenerateRegression):
        fit_tail_exponent(curve, 1.0)
    with pytest.raises(InsufficientTailData):
        fit_tail_exponent(CcdfCurve(np.arange(1.0, 6.0), np.linspace(1, .1, 5), "positive-tail", 5), 1.0)


def test_power_law_fit_planted():
    x = np.geomspace(0.1, 10, 30)
    f = power_law_fit(x, 2.5 * x ** 0.916)
    assert f.exponent == pytest.approx(0.916, abs=1e-12)
    assert f.prefactor == pytest.approx(2.5, rel=1e-12)
    assert f.residual_norm < 1e-12


def test_fit_gaussian():
    g = fit_gaussian(np.array([0.0, 0.0, 2.0, 2.0]))
    assert g.location == 1.0 and g.scale == 1.0
    x = generate(GeneratorSpec("gaussian-iid", 100_000, 3)).values
    g = fit_gaussian(x)
    assert abs(g.location) < 0.01 and abs(g.scale - 1) < 0.01
    with pytest.raises(SeriesTooShort):
        fit_gaussian(np.array([2.0, 2.0, 2.0]))


def test_gaussian_loglik_matches_scipy():
    from scipy import stats

    x = generate(GeneratorSpec("gaussian-iid", 1000, 9)).values
    g = fit_gaussian(x)
    assert g.log_likelihood == pytest.approx(stats.norm.logpdf(x, g.location, g.scale).sum(), rel=1e-12)


def test_student_t_loglik_matches_scipy():
    from scipy import stats

    x = generate(GeneratorSpec("student-t-iid", 500, 9)).values
    assert student_t_loglik(x, 0.1, 1.3, 3.7) == pytest.approx(stats.t.logpdf(x, 3.7, 0.1, 1.3).sum(), rel=1e-12)


def test_student_t_recovers_dof():
    x = generate(GeneratorSpec("student-t-iid", 100_000, 21, {"dof": 3.0})).values
    t = fit_student_t(x)
    assert abs(t.dof - 3.0) < 0.3
    assert t.log_likelihood >= fit_gaussian(x).log_likelihood
    assert 2 < t.dof <= 200 and t.scale > 0


def test_student_t_gaussian_limit():
    x = generate(GeneratorSpec("gaussian-iid", 100_000, 22)).values
    assert fit_student_t(x).dof > 50


def test_student_t_short():
    with pytest.raises(SeriesTooShort):
        fit_student_t(np.arange(10.0))
