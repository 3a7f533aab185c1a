import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twostage import outcomes
from twostage.outcomes import OutcomeModel, OutcomeModelError


def test_bernoulli_mean(rng):
    y = OutcomeModel.bernoulli(0.7, 0.5).sample(0, 100_000, rng)
    assert set(np.unique(y)) <= {0.0, 1.0}
    assert abs(y.mean() - 0.7) <= 0.01


def test_gaussian_mean(rng):
    y = OutcomeModel.gaussian(0.0, 1.0, 0.0, 0.25).sample(1, 100_000, rng)
    assert abs(y.mean()) <= 0.01


def test_poisson_variance(rng):
    y = OutcomeModel.poisson(1.04, 1.0).sample(0, 100_000, rng)
    assert abs(y.var() - 1.04) <= 0.05


def test_sample_outcome_scalar(rng):
    v = outcomes.sample_outcome(OutcomeModel.bernoulli(0.7, 0.5), 0, rng)
    assert v in (0.0, 1.0)


@pytest.mark.parametrize(
    "model, n, expected",
    [
        (OutcomeModel.gaussian(0, 1, 0, 0.25), 1000, 0.0),
        (OutcomeModel.gaussian(0, 1, 15 / math.sqrt(1000), 9), 1000, -15.0),
        (OutcomeModel.bernoulli(0.55, 0.5), 400, 1.0),
    ],
)
def test_signal(model, n, expected):
    assert outcomes.signal(model, n) == pytest.approx(expected, abs=1e-12)


def test_exact_moments():
    m = OutcomeModel.gaussian(1.0, 2.0, -1.0, 0.5)
    assert m.second_moment(0) == pytest.approx(3.0)
    assert m.fourth_moment(0) == pytest.approx(1 + 6 * 2 + 3 * 4)
    p = OutcomeModel.poisson(2.0, 1.0)
    assert p.second_moment(0) == pytest.approx(6.0)
    b = OutcomeModel.bernoulli(0.3, 0.6)
    assert b.second_moment(1) == b.mean(1) == pytest.approx(0.6)


def test_student_needs_df_above_four():
    with pytest.raises(OutcomeModelError):
        OutcomeModel.student_shift(0.0, 4.0, 10.0)


def test_shifted_arms():
    m = OutcomeModel.bernoulli(0.5, 0.5)
    assert m.shifted(0.2).mean(0) == pytest.approx(0.7)
    assert m.shifted(-0.1, arm=1).mean(1) == pytest.approx(0.4)


def test_from_config_rejects_unknown():
    with pytest.raises((OutcomeModelError, ValueError)):
        outcomes.from_config({"family": "gaussian", "mu0": 0, "var0": 1, "mu1": 0, "var1": 1, "bogus": 1})


@given(
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.99),
    st.integers(0, 1),
)
def test_bernoulli_moment_identities(p0, p1, arm):
    m = OutcomeModel.bernoulli(p0, p1)
    assert m.variance(arm) == pytest.approx(m.second_moment(arm) - m.mean(arm) ** 2)
    assert m.variance(arm) > 0


@given(st.floats(-5, 5), st.floats(0.1, 10), st.integers(0, 1))
def test_gaussian_variance_positive(mu, var, arm):
    m = OutcomeModel.gaussian(mu, var, -mu, var)
    assert m.variance(arm) == pytest.approx(var)
    assert math.isfinite(m.fourth_moment(arm))


@pytest.mark.parametrize(
    "model",
    [
        OutcomeModel.bernoulli(0.3, 0.8),
        OutcomeModel.gaussian(1.0, 2.0, -0.5, 0.5),
        OutcomeModel.poisson(1.5, 0.7),
        OutcomeModel.student_shift(0.4, 6.0, 8.0),
    ],
)
def test_law_of_large_numbers(model):
    rng = np.random.default_rng(7)
    for arm in (0, 1):
        y = model.sample(arm, 200_000, rng)
        se = math.sqrt(model.variance(arm) / len(y))
        assert abs(y.mean() - model.mean(arm)) < 5 * se
