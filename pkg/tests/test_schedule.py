import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idledqn.schedule import (ActivationSchedule, make_rng, probability_at, sample_activations,
                              tuned_sigma)

S = ActivationSchedule


def test_probability_examples():
    g = S.geometric_to_one(0.99)
    assert g.probability_at(0) == pytest.approx(0.01, abs=1e-15)
    assert g.probability_at(10_000) == pytest.approx(1.0, abs=1e-15)
    assert S.safeguarded(0.99, 0.2, 0.9999).probability_at(0) == 0.2
    assert all(S.always_on().probability_at(k) == 1.0 for k in (0, 1, 10**6))
    assert S.constant(0.7).probability_at(123) == 0.7
    assert S.capped_geometric(0.5, 0.9).probability_at(1) == pytest.approx(0.5 * (1 - 0.81))


def test_safeguard_caps_sigma():
    s = S.safeguarded(0.999999, p_floor=0.2, sigma_cap=0.99)
    assert s.probability_at(300) == pytest.approx(1 - 0.99 ** 301)


def test_negative_k_rejected():
    with pytest.raises(ValueError):
        probability_at(S.always_on(), -1)


@pytest.mark.parametrize("kw", [dict(kind="nope"), dict(kind="constant"), dict(kind="constant", p=0.0),
                                dict(kind="constant", p=1.2), dict(kind="geometric_to_one", sigma=1.0),
                                dict(kind="capped_geometric", sigma=0.9)])
def test_invalid_schedules(kw):
    with pytest.raises(ValueError):
        S(**kw)


def test_tuned_sigma():
    assert tuned_sigma(1e-4, 1.0, 40) == pytest.approx(0.996, abs=1e-15)
    with pytest.raises(ValueError):
        tuned_sigma(1e-4, 1.0, 0)
    with pytest.raises(ValueError):
        tuned_sigma(1 / 40, 1.0, 40)


@pytest.mark.parametrize("sched", [S.geometric_to_one(0.996), S.capped_geometric(0.7, 0.996),
                                   S.safeguarded(0.999, 0.2, 0.9999), S.geometric_to_one(0.5)])
def test_monotone_over_long_horizon(sched):
    prev = sched.probability_at(0)
    assert 0 < prev <= 1 and sched.p_min == prev
    for k in range(1, 1_000_001):
        p = sched.probability_at(k)
        assert p >= prev
        prev = p
    assert prev == pytest.approx(sched.p_max or 1.0)


@settings(max_examples=200)
@given(sigma=st.floats(0.01, 0.99999), k=st.integers(0, 100_000))
def test_complement_matches_power(sigma, k):
    p = S.geometric_to_one(sigma).probability_at(k)
    assert 0 < p <= 1
    assert abs((1 - p) - sigma ** (k + 1)) <= np.spacing(max(p, 0.5))


def test_sample_all_ones_and_budget():
    rng = make_rng(3)
    assert sample_activations(1.0, 7, rng).all()
    a, b = make_rng(5), make_rng(5)
    sample_activations(0.2, 11, a)
    sample_activations(0.9, 11, b)
    assert np.array_equal(a.random(4), b.random(4))
    with pytest.raises(ValueError):
        sample_activations(0.0, 3, rng)


def test_sample_determinism_and_paths():
    x = sample_activations(0.5, 200, make_rng(9, 0))
    assert np.array_equal(x, sample_activations(0.5, 200, make_rng(9, 0)))
    assert not np.array_equal(x, sample_activations(0.5, 200, make_rng(9, 1)))


def test_bernoulli_mean_and_independence():
    rng = make_rng(2024)
    draws = np.stack([sample_activations(0.7, 4, rng) for _ in range(100_000)])
    mean = draws[:, 0].mean()
    assert abs(mean - 0.7) <= 3 * np.sqrt(0.7 * 0.3 / draws.shape[0])
    corr = np.corrcoef(draws.T.astype(float))
    assert np.abs(corr[~np.eye(4, dtype=bool)]).max() < 0.01


def test_label_and_dict():
    s = S.capped_geometric(0.7, 0.996)
    assert s.label == "capped_geometric(sigma=0.996,p_max=0.7)"
    assert S(**s.to_dict()) == s
