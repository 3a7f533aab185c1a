"""Two-stage adaptive data generation.

Pilot: n1 units assigned to arm 0 with probability e0.
Follow-up: n2 units assigned to arm 0 with the clipped sampling probability
evaluated at the interim difference S1(0) - S1(1).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import rng as rngmod
from .selection import SelectionRule, eval_clipped

WEIGHTINGS = (0.0, 0.5, 1.0)


class ConfigError(ValueError):
    """Design violates one of the modelling assumptions."""


class OutcomeSampler(Protocol):
    def sample(self, arm: int, size: int, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class DesignConfig:
    n1: int
    n2: int
    e0: float
    rule: SelectionRule
    m: float = 0.5
    seed: int = 0

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def q(self) -> tuple[float, float]:
        return self.n1 / self.n, self.n2 / self.n

    def validate(self, *, strict_split: bool = True) -> list[str]:
        """Check the design against the weighting assumptions.

        Raises ``ConfigError`` on violations; returns a list of warnings.
        """
        notes = []
        if self.n1 < 1 or self.n2 < 0:
            raise ConfigError("n1 must be >= 1 and n2 >= 0")
        if strict_split and self.n2 == 0:
            raise ConfigError("stage fractions q_t must lie in (0, 1): n2 = 0")
        if not 0.0 < self.e0 < 1.0:
            raise ConfigError(f"pilot probability e0={self.e0} must lie in (0, 1)")
        if not (0.05 <= self.e0 <= 0.95):
            notes.append(f"pilot probability e0={self.e0} is close to the boundary; exploration may be poor")
        if self.m not in WEIGHTINGS:
            raise ConfigError(f"weighting m={self.m} must be one of {WEIGHTINGS}")
        clip = self.rule.clip
        if self.m == 0.0 and clip <= 0.0:
            raise ConfigError("m=0 (constant weighting) requires clip l_n > 0 so follow-up propensities stay bounded away from 0")
        if self.m == 0.5:
            if clip <= 0.0:
                raise ConfigError("m=1/2 (adaptive weighting) requires clip l_n in (0, 1/2)")
            if self.n * clip < 10:
                notes.append(f"N*l_n = {self.n * clip:.3g} < 10; adaptive weighting needs N*l_n large")
        return notes


@dataclass
class TrialData:
    """Product of one two-stage trial; the estimators' only input."""

    a1: np.ndarray
    y1: np.ndarray
    a2: np.ndarray
    y2: np.ndarray
    e0: float
    p2_arm0: float
    s1: tuple[float, float]
    sigma_hat: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n1(self) -> int:
        return len(self.a1)

    @property
    def n2(self) -> int:
        return len(self.a2)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def interim(self) -> float:
        return self.s1[0] - self.s1[1]

    def stage(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        return (self.a1, self.y1) if t == 1 else (self.a2, self.y2)

    def propensity(self, t: int, s: int) -> float:
        p0 = self.e0 if t == 1 else self.p2_arm0
        return p0 if s == 0 else 1.0 - p0


def draw_assignments(n: int, p_arm0: float, rng: np.random.Generator) -> np.ndarray:
    # arm 1 iff u >= p_arm0, so p_arm0 = 0 gives all ones and 1 gives all zeros
    return (rng.random(n) >= p_arm0).astype(np.int8)


def draw_outcomes(model: OutcomeSampler, a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw both potential outcomes per unit and reveal the assigned one."""
    n = len(a)
    y0 = model.sample(0, n, rng)
    y1 = model.sample(1, n, rng)
    return np.where(a == 0, y0, y1)


def interim_statistic(a: np.ndarray, y: np.ndarray, e0: float) -> tuple[float, float]:
    """Scaled pilot IPW sums: S1(s) = n1^{-1/2} sum 1(A=s) Y / e(s)."""
    root = math.sqrt(len(a))
    s0 = float(np.sum(y[a == 0])) / e0 / root
    s1 = float(np.sum(y[a == 1])) / (1.0 - e0) / root
    return s0, s1


def pilot_sigma_hat(a: np.ndarray, y: np.ndarray, e0: float) -> float:
    """Null standard deviation of S1(0) - S1(1) estimated from pilot data.

    Under equal means the variance is E[Y(0)^2]/e(0) + E[Y(1)^2]/e(1), whose
    IPW estimate is the mean of Y^2 / e(A)^2.
    """
    e = np.where(a == 0, e0, 1.0 - e0)
    var = float(np.mean(y**2 / e**2))
    return math.sqrt(var) if var > 0 else 1.0


def run_pilot(cfg: DesignConfig, model: OutcomeSampler, rng: np.random.Generator):
    a = draw_assignments(cfg.n1, cfg.e0, rng)
    y = draw_outcomes(model, a, rng)
    return a, y, interim_statistic(a, y, cfg.e0)


def resolve_rule(rule: SelectionRule, a1, y1, e0) -> tuple[SelectionRule, float | None]:
    if rule.needs_sigma:
        sigma = pilot_sigma_hat(a1, y1, e0)
        return rule.with_sigma(sigma), sigma
    if rule.kind == "enrich_pvalue":
        return rule, float(rule.sigma_hat)
    return rule, None


def run_followup(cfg: DesignConfig, model: OutcomeSampler, interim: tuple[float, float], rng, rule=None):
    rule = cfg.rule if rule is None else rule
    p2 = float(eval_clipped(rule, 0, interim[0] - interim[1]))
    a = draw_assignments(cfg.n2, p2, rng)
    y = draw_outcomes(model, a, rng)
    return a, y, p2


def run_trial(cfg: DesignConfig, model: OutcomeSampler, rng=None) -> TrialData:
    """Pilot stage, selection, follow-up stage.

    ``rng`` is a Generator (used for both stages), a pair of Generators
    (stage 1, stage 2), or None to derive both from ``cfg.seed``.
    """
    if rng is None:
        g1, g2 = rngmod.rep_streams(cfg.seed, 0, 0)
    elif isinstance(rng, tuple):
        g1, g2 = rng
    else:
        g1 = g2 = rng
    a1, y1, s1 = run_pilot(cfg, model, g1)
    rule, sigma = resolve_rule(cfg.rule, a1, y1, cfg.e0)
    a2, y2, p2 = run_followup(cfg, model, s1, g2, rule=rule)
    return TrialData(a1=a1, y1=y1, a2=a2, y2=y2, e0=cfg.e0, p2_arm0=p2, s1=s1, sigma_hat=sigma)


def check_design(cfg: DesignConfig):
    for msg in cfg.validate():
        warnings.warn(msg, stacklevel=2)
