"""Potential-outcome laws with exact moments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

FAMILIES = {
    "bernoulli": ("p0", "p1"),
    "gaussian": ("mu0", "var0", "mu1", "var1"),
    "poisson": ("lam0", "lam1"),
    "student_shift": ("theta", "df0", "df1"),
    # zero-variance arms; only for degenerate-input diagnostics
    "constant": ("c0", "c1"),
}


class OutcomeModelError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeModel:
    """A pair of potential-outcome distributions, one per arm.

    ``params`` holds the family-specific parameters listed in ``FAMILIES``.
    Use the named constructors (``OutcomeModel.gaussian(...)`` etc.) in code.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise OutcomeModelError(f"unknown outcome family {self.family!r}; expected one of {sorted(FAMILIES)}")
        expected = set(FAMILIES[self.family])
        got = set(self.params)
        if got != expected:
            raise OutcomeModelError(
                f"{self.family} needs parameters {sorted(expected)}, got {sorted(got)}"
            )
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        self._check_domain()

    # constructors
    @classmethod
    def bernoulli(cls, p0: float, p1: float) -> "OutcomeModel":
        return cls("bernoulli", {"p0": p0, "p1": p1})

    @classmethod
    def gaussian(cls, mu0: float, var0: float, mu1: float, var1: float) -> "OutcomeModel":
        return cls("gaussian", {"mu0": mu0, "var0": var0, "mu1": mu1, "var1": var1})

    @classmethod
    def poisson(cls, lam0: float, lam1: float) -> "OutcomeModel":
        return cls("poisson", {"lam0": lam0, "lam1": lam1})

    @classmethod
    def student_shift(cls, theta: float, df0: float, df1: float) -> "OutcomeModel":
        return cls("student_shift", {"theta": theta, "df0": df0, "df1": df1})

    @classmethod
    def constant(cls, c0: float, c1: float) -> "OutcomeModel":
        return cls("constant", {"c0": c0, "c1": c1})

    def _check_domain(self):
        p = self.params
        if self.family == "bernoulli":
            for k in ("p0", "p1"):
                if not 0.0 <= p[k] <= 1.0:
                    raise OutcomeModelError(f"bernoulli {k}={p[k]} outside [0, 1]")
        elif self.family == "gaussian":
            for k in ("var0", "var1"):
                if p[k] < 0:
                    raise OutcomeModelError(f"gaussian {k} must be >= 0")
        elif self.family == "poisson":
            for k in ("lam0", "lam1"):
                if p[k] < 0:
                    raise OutcomeModelError(f"poisson {k} must be >= 0")
        elif self.family == "student_shift":
            for k in ("df0", "df1"):
                if p[k] <= 4:
                    raise OutcomeModelError(f"student_shift {k}={p[k]} must exceed 4 for a finite fourth moment")

    # moments
    def mean(self, arm: int) -> float:
        p, s = self.params, _arm(arm)
        if self.family == "bernoulli":
            return p[f"p{s}"]
        if self.family == "gaussian":
            return p[f"mu{s}"]
        if self.family == "poisson":
            return p[f"lam{s}"]
        if self.family == "student_shift":
            return p["theta"] if s == 0 else 0.0
        return p[f"c{s}"]

    def variance(self, arm: int) -> float:
        p, s = self.params, _arm(arm)
        if self.family == "bernoulli":
            q = p[f"p{s}"]
            return q * (1.0 - q)
        if self.family == "gaussian":
            return p[f"var{s}"]
        if self.family == "poisson":
            return p[f"lam{s}"]
        if self.family == "student_shift":
            df = p[f"df{s}"]
            return df / (df - 2.0)
        return 0.0

    def second_moment(self, arm: int) -> float:
        return self.variance(arm) + self.mean(arm) ** 2

    def fourth_moment(self, arm: int) -> float:
        p, s = self.params, _arm(arm)
        mu, var = self.mean(arm), self.variance(arm)
        if self.family == "bernoulli":
            return p[f"p{s}"]
        if self.family == "gaussian":
            return mu**4 + 6.0 * mu**2 * var + 3.0 * var**2
        if self.family == "poisson":
            lam = p[f"lam{s}"]
            return lam**4 + 6.0 * lam**3 + 7.0 * lam**2 + lam
        if self.family == "student_shift":
            df = p[f"df{s}"]
            central4 = var**2 * 3.0 * (df - 2.0) / (df - 4.0)
            return mu**4 + 6.0 * mu**2 * var + central4
        return mu**4

    def check_moments(self):
        """Raise unless both arms have positive variance (bounded-moment condition)."""
        for s in (0, 1):
            if not self.variance(s) > 0:
                raise OutcomeModelError(
                    f"arm {s} has zero variance; the moment conditions need Var[Y(s)] > 0"
                )

    # sampling
    def sample(self, arm: int, size: int, rng: np.random.Generator) -> np.ndarray:
        p, s = self.params, _arm(arm)
        if self.family == "bernoulli":
            return (rng.random(size) < p[f"p{s}"]).astype(float)
        if self.family == "gaussian":
            return p[f"mu{s}"] + math.sqrt(p[f"var{s}"]) * rng.standard_normal(size)
        if self.family == "poisson":
            return rng.poisson(p[f"lam{s}"], size).astype(float)
        if self.family == "student_shift":
            return self.mean(s) + rng.standard_t(p[f"df{s}"], size)
        return np.full(size, p[f"c{s}"])

    def shifted(self, theta: float, arm: int = 0) -> "OutcomeModel":
        """Same model with the given arm's location moved by ``theta``."""
        keys = {
            "bernoulli": ("p0", "p1"),
            "gaussian": ("mu0", "mu1"),
            "poisson": ("lam0", "lam1"),
            "student_shift": ("theta", None),
            "constant": ("c0", "c1"),
        }[self.family]
        params = dict(self.params)
        if keys[_arm(arm)] is None:
            raise OutcomeModelError("student_shift only carries a location for arm 0")
        params[keys[arm]] += theta
        return replace(self, params=params)


def _arm(arm) -> int:
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm!r}")
    return int(arm)


def sample_outcome(model: OutcomeModel, arm: int, rng: np.random.Generator) -> float:
    return float(model.sample(arm, 1, rng)[0])


def signal(model: OutcomeModel, n: int) -> float:
    """Scaled mean difference sqrt(N) * (E[Y(0)] - E[Y(1)])."""
    if n < 1:
        raise ValueError("N must be >= 1")
    return math.sqrt(n) * (model.mean(0) - model.mean(1))


def from_config(section: dict) -> OutcomeModel:
    section = dict(section)
    family = section.pop("family", None)
    if family is None:
        raise OutcomeModelError("outcome section needs a 'family' key")
    return OutcomeModel(family, section)
