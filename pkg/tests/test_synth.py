import numpy as np
import pytest

from stylized_facts.correlation import autocorrelation
from stylized_facts.errors import InvalidParameters
from stylized_facts.moments import excess_kurtosis
from stylized_facts.quakes import event_counter, omori_model
from stylized_facts.series import PriceSeries, ReturnSeries, log_returns
from stylized_facts.synth import (
    DEFAULTS,
    FAMILIES,
    GeneratorSpec,
    generate,
    generate_prices,
    omori_counter,
    returns_to_prices,
)


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_deterministic(family):
    a = generate(GeneratorSpec(family, 8000, 3))
    b = generate(GeneratorSpec(family, 8000, 3))
    c = generate(GeneratorSpec(family, 8000, 4))
    key = (lambda s: s.prices) if isinstance(a, PriceSeries) else (lambda s: s.values)
    assert np.array_equal(key(a), key(b))
    assert not np.array_equal(key(a), key(c))
    assert len(generate_prices(GeneratorSpec(family, 8000, 3))) >= 8000


def test_gaussian_variance():
    x = generate(GeneratorSpec("gaussian-iid", 100_000, 1, {"sigma": 2.0})).values
    assert abs(np.var(x) - 4.0) < 0.05 * 4.0


def test_student_t_kurtosis():
    x = generate(GeneratorSpec("student-t-iid", 1_000_000, 2, {"dof": 10.0})).values
    assert excess_kurtosis(x) == pytest.approx(6 / (10 - 4), abs=0.15)


def test_garch_guard_and_clustering():
    with pytest.raises(InvalidParameters):
        generate(GeneratorSpec("garch-1-1", 1000, 1, {"alpha": 0.2, "beta": 0.8}))
    s = generate(GeneratorSpec("garch-1-1", 100_000, 1))
    r = log_returns(s, 1).values
    assert autocorrelation(r * r, 5).values[1] > 0.1
    assert abs(autocorrelation(r, 5).values[1]) < 3 / np.sqrt(r.size)
    assert s.has_volume


def test_generator_spec_validation():
    with pytest.raises(InvalidParameters):
        generate(GeneratorSpec("levy", 100, 1))
    with pytest.raises(InvalidParameters):
        generate(GeneratorSpec("gaussian-iid", 100, 1, {"nu": 3}))
    with pytest.raises(InvalidParameters):
        generate(GeneratorSpec("pareto-tail", 100, 1, {"alpha": -1.0}))
    assert set(DEFAULTS) == set(FAMILIES)


def test_omori_counter_matches_model():
    counts = omori_counter(0.8, [100], [5.0], 1000)
    t = np.arange(1001.0)
    assert np.array_equal(counts, omori_model(t, [100], [5.0], 0.8))
    noisy = omori_counter(0.8, [100], [5.0], 1000, seed=1)
    assert np.all(np.diff(noisy) >= 0) and noisy[0] == 0
    with pytest.raises(InvalidParameters):
        omori_counter(1.2, [100], [5.0], 1000, seed=1)


def test_omori_process_counter_shape():
    r = generate(GeneratorSpec("omori-process", 20_000, 5, {"onsets": [1000], "amplitudes": [0.5]}))
    assert isinstance(r, ReturnSeries)
    c = event_counter(r, threshold=1.0)
    # aftershocks are Bernoulli draws with the model's per-bar increment as probability
    inc = np.clip(np.diff(omori_model(np.arange(20_001.0), [1000], [0.5], 0.8)), 0, 1)
    inc[1000] = 1.0  # the main shock itself
    assert c.counts[1000] == 0
    assert abs(c.counts[-1] - inc.sum()) < 4 * np.sqrt(inc.sum())


def test_returns_to_prices_roundtrip():
    r = np.array([0.1, -0.2, 0.05])
    s = returns_to_prices(r, 2.0)
    assert len(s) == 4 and s.prices[0] == 2.0
    assert np.allclose(log_returns(s, 1).values, r, atol=1e-15)
    with pytest.raises(InvalidParameters):
        returns_to_prices(np.full(10, 100.0))


def test_random_walk_binary_steps():
    s = generate(GeneratorSpec("random-walk-prices", 1000, 2, {"binary": 1, "sigma": 0.01}))
    assert np.allclose(np.abs(log_returns(s, 1).values), 0.01)
