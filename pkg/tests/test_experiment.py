import math

import numpy as np
import pytest

from twostage import rng as rngmod
from twostage.experiment import ConfigError, DesignConfig, interim_statistic, run_followup, run_trial
from twostage.outcomes import OutcomeModel
from twostage.selection import SelectionRule, eval_clipped

GAUSS = OutcomeModel.gaussian(0.0, 1.0, 0.0, 0.25)


def test_interim_examples():
    s0, s1 = interim_statistic(np.array([0, 0, 1, 1]), np.array([1.0, 3.0, 2.0, 2.0]), 0.5)
    assert (s0, s1) == (4.0, 4.0)
    assert interim_statistic(np.zeros(4, int), np.zeros(4), 0.5) == (0.0, 0.0)
    s0, s1 = interim_statistic(np.array([1, 1]), np.array([5.0, 5.0]), 0.5)
    assert s0 == 0.0
    # (1/sqrt 2) * (5 + 5) / 0.5
    assert s1 == pytest.approx(20 / math.sqrt(2), abs=1e-12)


def test_followup_degenerate_probability(rng):
    cfg = DesignConfig(10, 50, 0.5, SelectionRule("eps_greedy", 0.0), m=1.0)
    a, _, p2 = run_followup(cfg, GAUSS, (0.0, 2.0), rng)
    assert p2 == 0.0 and np.all(a == 1)


def test_followup_clipped_fraction(rng):
    cfg = DesignConfig(10, 100_000, 0.5, SelectionRule("eps_greedy", 0.1))
    a, _, p2 = run_followup(cfg, GAUSS, (5.0, 0.0), rng)
    assert p2 == pytest.approx(0.9)
    assert abs(np.mean(a == 0) - 0.9) <= 0.01


def test_followup_thompson_half(rng):
    cfg = DesignConfig(10, 100_000, 0.5, SelectionRule("thompson", 0.2))
    a, _, p2 = run_followup(cfg, GAUSS, (1.0, 1.0), rng)
    assert p2 == 0.5
    assert abs(np.mean(a == 0) - 0.5) <= 0.01


def test_same_seed_identical():
    cfg = DesignConfig(50, 50, 0.5, SelectionRule("thompson", 0.1), seed=3)
    d1, d2 = run_trial(cfg, GAUSS), run_trial(cfg, GAUSS)
    for f in ("a1", "y1", "a2", "y2"):
        assert np.array_equal(getattr(d1, f), getattr(d2, f))
    assert d1.p2_arm0 == d2.p2_arm0 and d1.s1 == d2.s1


def test_eps_greedy_propensity_values():
    cfg = DesignConfig(500, 500, 0.5, SelectionRule("eps_greedy", 0.025))
    model = OutcomeModel.gaussian(0.0, 1.0, 0.0, 9.0)
    seen = {run_trial(cfg, model, rngmod.rep_streams(1, 2, r)).p2_arm0 for r in range(40)}
    assert seen == {0.025, 0.975}


def test_p2_matches_rule_exactly():
    rule = SelectionRule("thompson", 0.05)
    cfg = DesignConfig(40, 40, 0.3, rule)
    for r in range(20):
        d = run_trial(cfg, GAUSS, rngmod.rep_streams(0, 9, r))
        assert d.p2_arm0 == eval_clipped(rule, 0, d.s1[0] - d.s1[1])
        assert d.s1 == interim_statistic(d.a1, d.y1, 0.3)


def test_consistency_outcome_of_assigned_arm():
    # arm 0 always yields 1, arm 1 always yields -1
    cfg = DesignConfig(30, 30, 0.5, SelectionRule("thompson", 0.1))
    d = run_trial(cfg, OutcomeModel.constant(1.0, -1.0), np.random.default_rng(0))
    for a, y in ((d.a1, d.y1), (d.a2, d.y2)):
        assert np.array_equal(y, np.where(a == 0, 1.0, -1.0))


def test_empty_followup_stage():
    cfg = DesignConfig(20, 0, 0.5, SelectionRule("thompson", 0.1))
    d = run_trial(cfg, GAUSS, np.random.default_rng(0))
    assert d.n2 == 0 and len(d.y2) == 0


def test_stage_streams_independent():
    cfg = DesignConfig(30, 30, 0.5, SelectionRule("thompson", 0.1))
    g = rngmod.rep_streams(0, 1, 0)
    d = run_trial(cfg, GAUSS, g)
    g1, _ = rngmod.rep_streams(0, 1, 0)
    d2 = run_trial(cfg, GAUSS, (g1, np.random.default_rng(99)))
    assert np.array_equal(d.y1, d2.y1)


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(m=0.0, rule=SelectionRule("thompson", 0.0)), "requires clip l_n > 0"),
        (dict(m=0.5, rule=SelectionRule("thompson", 0.0)), r"requires clip l_n in \(0, 1/2\)"),
        (dict(e0=1.0), "e0"),
        (dict(m=0.25), "weighting"),
        (dict(n2=0), "q_t"),
    ],
)
def test_validate_errors(kw, msg):
    base = dict(n1=100, n2=100, e0=0.5, rule=SelectionRule("thompson", 0.1), m=0.5)
    base.update(kw)
    with pytest.raises(ConfigError, match=msg):
        DesignConfig(**base).validate()


def test_validate_warns_small_n_clip():
    notes = DesignConfig(20, 20, 0.5, SelectionRule("thompson", 0.1), m=0.5).validate()
    assert any("N*l_n" in n for n in notes)


def test_m1_allows_zero_clip():
    assert DesignConfig(100, 100, 0.5, SelectionRule("eps_greedy", 0.0), m=1.0).validate() == []
