import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stylized_facts.errors import InsufficientRange, SeriesTooShort
from stylized_facts.persistence import (
    PersistenceCurve,
    curve_from_durations,
    fit_persistence_exponent,
    persistence_curve,
    run_durations,
)
from stylized_facts.synth import GeneratorSpec, generate_prices

prices_st = arrays(float, st.integers(3, 300), elements=st.integers(1, 6).map(float))


def brute_runs(p, s, D):
    """Pure-Python run lengths from start ``s`` (ties persist on both branches)."""
    up = down = None
    for d in range(1, D + 1):
        if up is None and p[s + d] < p[s]:
            up = d - 1
        if down is None and p[s + d] > p[s]:
            down = d - 1
    return (D if up is None else up), (D if down is None else down)


def enumerated_counts(n):
    """Survivor counts over all 2^n symmetric +-1 walks started at their origin."""
    plus = [0] * (n + 1)
    minus = [0] * (n + 1)
    for steps in itertools.product((-1, 1), repeat=n):
        path = [0]
        for s in steps:
            path.append(path[-1] + s)
        up, down = brute_runs(path, 0, n)
        for t in range(up + 1):
            plus[t] += 1
        for t in range(down + 1):
            minus[t] += 1
    return plus, minus


def all_walks(n):
    steps = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=float)
    paths = np.concatenate((np.zeros((steps.shape[0], 1)), np.cumsum(steps, axis=1)), axis=1) + 100.0
    starts = np.arange(steps.shape[0]) * (n + 1)
    return paths.ravel(), starts


def test_monotone_prices():
    c = persistence_curve(np.arange(1.0, 501.0), 1000, 50, seed=1)
    assert np.all(c.p_plus == 1.0)
    assert c.p_minus[0] == 1.0 and np.all(c.p_minus[1:] == 0.0)
    assert c.censored_count == 1000


def test_constant_prices():
    c = persistence_curve(np.full(300, 7.0), 500, 40, seed=1)
    assert np.all(c.p_plus == 1.0) and np.all(c.p_minus == 1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 11])
def test_enumeration_small_walks(n):
    prices, starts = all_walks(n)
    c = persistence_curve(prices, max_duration=n, starts=starts)
    plus, minus = enumerated_counts(n)
    assert list(c.plus_counts) == plus
    assert list(c.minus_counts) == minus
    assert c.n_samples == 2 ** n


def test_enumeration_closed_form():
    # staying >= 0 for n steps of a +-1 walk: C(n, floor(n/2)) of the 2^n paths
    from math import comb

    for n in (4, 9, 14):
        prices, starts = all_walks(n)
        c = persistence_curve(prices, max_duration=n, starts=starts)
        assert c.plus_counts[n] == comb(n, n // 2)
        assert c.minus_counts[n] == comb(n, n // 2)


@given(prices_st, st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_exhaustive_equals_brute_scan(p, D):
    if p.size <= D + 1:
        return
    c = persistence_curve(p, max_duration=D, exhaustive=True, seed=None)
    runs = [brute_runs(list(p), s, D) for s in range(p.size - D)]
    ref = curve_from_durations([u for u, _ in runs], [d for _, d in runs], D)
    assert np.array_equal(c.plus_counts, ref.plus_counts)
    assert np.array_equal(c.minus_counts, ref.minus_counts)
    other = persistence_curve(p, max_duration=D, exhaustive=True, seed=123)
    assert np.array_equal(c.p_global, other.p_global)


@given(prices_st, st.integers(1, 15), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_curve_identities(p, D, seed):
    if p.size <= D + 1:
        return
    c = persistence_curve(p, 200, D, seed=seed)
    assert np.array_equal(c.p_global, (c.p_plus + c.p_minus) / 2)
    for arr in (c.p_plus, c.p_minus, c.p_global):
        assert np.all(np.diff(arr) <= 0) and np.all((arr >= 0) & (arr <= 1))
    assert c.p_plus[0] == c.p_minus[0] == 1.0
    assert c.censored_count == int(c.plus_counts[-1] + c.minus_counts[-1])


@given(arrays(float, st.integers(5, 300), elements=st.floats(0.5, 50)), st.integers(1, 10), st.integers(0, 99))
@settings(max_examples=60, deadline=None)
def test_reciprocal_swaps_branches(p, D, seed):
    if p.size <= D + 1:
        return
    starts = np.random.default_rng(seed).integers(0, p.size - D, 100)
    a = persistence_curve(p, max_duration=D, starts=starts)
    b = persistence_curve(1.0 / p, max_duration=D, starts=starts)
    assert np.array_equal(a.p_plus, b.p_minus) and np.array_equal(a.p_minus, b.p_plus)


def test_seeded_sampling_reproducible():
    s = generate_prices(GeneratorSpec("random-walk-prices", 20_000, 3))
    a = persistence_curve(s, 2000, 100, seed=5)
    b = persistence_curve(s, 2000, 100, seed=5)
    assert np.array_equal(a.p_global, b.p_global)
    assert not np.array_equal(a.p_global, persistence_curve(s, 2000, 100, seed=6).p_global)


def test_guards():
    with pytest.raises(SeriesTooShort):
        persistence_curve(np.arange(1.0, 11.0), 10, 9, seed=1)
    with pytest.raises(SeriesTooShort):
        run_durations(np.arange(1.0, 11.0), [5], 5)


def test_fit_planted_power_law():
    t = np.arange(0, 201)
    pg = np.where(t > 0, np.maximum(t, 1.0) ** -0.543, 1.0)
    c = PersistenceCurve(t, pg, pg, pg, 1, 0, t, t)
    f = fit_persistence_exponent(c, (1, 100))
    assert abs(f.exponent - 0.543) < 1e-10
    assert f.fit_range == (1.0, 100.0)


def test_fit_insufficient_range():
    t = np.arange(0, 10)
    pg = np.where(t < 3, 1.0, 0.0)
    c = PersistenceCurve(t, pg, pg, pg, 1, 0, t, t)
    with pytest.raises(InsufficientRange):
        fit_persistence_exponent(c, (1, 9))


def test_csv_export(tmp_path):
    c = persistence_curve(np.arange(1.0, 60.0), 10, 5, seed=0)
    c.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,p_plus,p_minus,p_global,n_at_risk"
    assert len(lines) == 7
