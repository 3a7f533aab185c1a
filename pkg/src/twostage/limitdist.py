"""Closed-form weak limits of the WIPW statistics.

The limit of sqrt(N) T_N - c_N is a randomly weighted sum of two dependent
Gaussian pairs: A1 ~ N(0, (rho1)) and A2 | A1 ~ N(0, (rho2(A1))), where
(rho) is the 2x2 correlation matrix with off-diagonal rho. The follow-up
propensities, variances, correlation and weights are all functions of A1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .outcomes import OutcomeModel
from .selection import SelectionRule, clipped_pair

RHO_BOUND = 1.0 - 1e-9
V_FLOOR = 1e-8
WEIGHTINGS = {"C": 0.0, "A": 0.5, "M1": 1.0}
SCALINGS = ("U", "N")


class LimitError(ValueError):
    pass


@dataclass
class Diagnostics:
    """Counters for numerical guards applied while sampling."""

    clamp_count: int = 0
    floor_count: int = 0

    def merge(self, other: "Diagnostics"):
        self.clamp_count += other.clamp_count
        self.floor_count += other.floor_count


def weighting_for_m(m: float) -> str:
    for k, v in WEIGHTINGS.items():
        if v == m:
            return k
    raise ValueError(f"no weighting scheme for m={m}")


# ---- elementary pieces -------------------------------------------------


def selection_score(a1_0, a1_1, v1_0, v1_1, c, e0: float, q1: float = 0.5):
    """Limit of the interim difference given the first-stage draw.

    a1_0 sqrt(v1_0 / e(0)) - a1_1 sqrt(v1_1 / e(1)) + c sqrt(q1); -inf when c = -inf.
    """
    if c == -math.inf:
        shape = np.broadcast(np.asarray(a1_0), np.asarray(a1_1)).shape
        return np.full(shape, -math.inf) if shape else -math.inf
    out = (
        np.asarray(a1_0) * np.sqrt(np.asarray(v1_0) / e0)
        - np.asarray(a1_1) * np.sqrt(np.asarray(v1_1) / (1.0 - e0))
        + c * math.sqrt(q1)
    )
    return out if np.ndim(out) else float(out)


def sqrt_corr2(rho):
    """Entries (a, b) of the symmetric square root [[a, b], [b, a]] of (rho)."""
    rho = np.asarray(rho, dtype=float)
    up, dn = np.sqrt(1.0 + rho), np.sqrt(1.0 - rho)
    return (up + dn) / 2.0, (up - dn) / 2.0


def clamp_rho(rho, diag: Diagnostics | None = None):
    rho = np.asarray(rho, dtype=float)
    if np.any(~np.isfinite(rho)):
        raise LimitError("non-finite correlation")
    out = np.clip(rho, -RHO_BOUND, RHO_BOUND)
    if diag is not None:
        diag.clamp_count += int(np.count_nonzero(out != rho))
    return out


def correlation(h0, h1, v0, v1, mu0, mu1):
    """-(H(0) H(1) / (V(0) V(1)))^{1/2} mu(0) mu(1)."""
    return -np.sqrt(np.asarray(h0) * np.asarray(h1) / (np.asarray(v0) * np.asarray(v1))) * mu0 * mu1


def limit_weights(weighting: str, q, h1, v1, h2, v2):
    """Unnormalised weights w̄[t][s] as arrays broadcast over draws.

    ``h1``, ``v1`` have shape (2,) and ``h2``, ``v2`` shape (n, 2). Returns an
    array of shape (n, 2, 2) indexed [draw, stage, arm].

    Adaptive weights use the simplified form sqrt(q_t V_t) / sum_k q_k sqrt(H_k),
    which equals (M / R^2)^{1/2} whenever H_t > 0 and stays finite at H_2 = 0.
    """
    q1, q2 = q
    h1 = np.broadcast_to(np.asarray(h1, dtype=float), np.shape(h2))
    v1 = np.broadcast_to(np.asarray(v1, dtype=float), np.shape(v2))
    h2 = np.asarray(h2, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if weighting == "C":
        if np.any(h2 <= 0) or np.any(h1 <= 0):
            raise LimitError("constant weighting needs follow-up propensities bounded away from 0 (clip l_n > 0)")
        w1 = np.sqrt(q1 * v1 / h1)
        w2 = np.sqrt(q2 * v2 / h2)
    elif weighting == "A":
        denom = q1 * np.sqrt(h1) + q2 * np.sqrt(h2)
        w1 = np.sqrt(q1 * v1) / denom
        w2 = np.sqrt(q2 * v2) / denom
    elif weighting == "M1":
        denom = q1 * h1 + q2 * h2
        w1 = np.sqrt(q1 * h1 * v1) / denom
        w2 = np.sqrt(q2 * h2 * v2) / denom
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return np.stack([w1, w2], axis=-2)


def normalize_weights(w):
    """Divide by the root-sum-of-squares over (stage, arm)."""
    total = np.sqrt(np.sum(w**2, axis=(-2, -1), keepdims=True))
    return w / total


def combine(a1, a2, w):
    """sum_t w[t][0] A_t(0) - sum_t w[t][1] A_t(1)."""
    return (
        w[..., 0, 0] * a1[..., 0]
        + w[..., 1, 0] * a2[..., 0]
        - w[..., 0, 1] * a1[..., 1]
        - w[..., 1, 1] * a2[..., 1]
    )


def correlated_pair(rho, z):
    """Map standard normal pairs z (n, 2) to pairs with correlation rho."""
    a, b = sqrt_corr2(rho)
    return np.stack([a * z[:, 0] + b * z[:, 1], b * z[:, 0] + a * z[:, 1]], axis=-1)


# ---- parameter object --------------------------------------------------


@dataclass(frozen=True)
class LimitParams:
    """Everything the limit law depends on.

    ``rule.clip`` is the limiting clip rate used for the follow-up
    propensities. ``sigma`` rescales the interim score for the p-value
    enrichment rule and is filled in from the moments when omitted.
    """

    c: float
    mean: tuple[float, float]
    second: tuple[float, float]
    e0: float
    rule: SelectionRule
    q: tuple[float, float] = (0.5, 0.5)
    weighting: str = "A"
    scaling: str = "U"
    sigma: float | None = None
    diag: Diagnostics = field(default_factory=Diagnostics, compare=False)

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {sorted(WEIGHTINGS)}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}")
        if self.c > 0:
            raise ValueError("limiting signal c must lie in [-inf, 0]")
        if self.rule.kind == "enrich_pvalue" and self.sigma is None:
            sigma = math.sqrt(self.second[0] / self.e0 + self.second[1] / (1.0 - self.e0))
            object.__setattr__(self, "sigma", sigma)
        v1 = self.v1
        if np.any(v1 <= 0):
            raise LimitError("first-stage limiting variances must be positive")

    @classmethod
    def from_model(cls, model: OutcomeModel, rule: SelectionRule, e0: float, c: float, **kw) -> "LimitParams":
        return cls(
            c=c,
            mean=(model.mean(0), model.mean(1)),
            second=(model.second_moment(0), model.second_moment(1)),
            e0=e0,
            rule=rule,
            **kw,
        )

    def with_(self, **kw) -> "LimitParams":
        return replace(self, **kw)

    @property
    def h1(self) -> np.ndarray:
        return np.array([self.e0, 1.0 - self.e0])

    @property
    def v1(self) -> np.ndarray:
        mu, m2 = np.asarray(self.mean), np.asarray(self.second)
        return m2 - self.h1 * mu**2

    @property
    def cov1(self) -> float:
        h, v = self.h1, self.v1
        return float(correlation(h[0], h[1], v[0], v[1], self.mean[0], self.mean[1]))

    @property
    def resolved_rule(self) -> SelectionRule:
        if self.rule.kind == "enrich_pvalue":
            return self.rule.with_sigma(self.sigma)
        return self.rule


def limit_params_stage2(p: LimitParams, a1):
    """(H2, V2, Cov2) as functions of first-stage draws ``a1`` (n, 2)."""
    a1 = np.atleast_2d(np.asarray(a1, dtype=float))
    v1 = p.v1
    score = selection_score(a1[:, 0], a1[:, 1], v1[0], v1[1], p.c, p.e0, p.q[0])
    h2 = np.stack([np.asarray(h, dtype=float).reshape(-1) for h in clipped_pair(p.resolved_rule, score)], axis=-1)
    mu, m2 = np.asarray(p.mean), np.asarray(p.second)
    v2 = m2 - h2 * mu**2
    if np.any(v2 <= 0):
        p.diag.floor_count += int(np.count_nonzero(v2 <= V_FLOOR))
        v2 = np.maximum(v2, V_FLOOR)
    cov2 = correlation(h2[:, 0], h2[:, 1], v2[:, 0], v2[:, 1], mu[0], mu[1])
    return h2, v2, cov2


def sample_limit(p: LimitParams, n_draws: int, rng: np.random.Generator, arm: int | None = None, block: int = 1 << 16):
    """i.i.d. draws of the limit law.

    With ``arm`` given, returns the single-arm limit sum_t A_t(s) w̄_t(s)
    (always unnormalised). Otherwise the two-arm difference with the
    scaling in ``p.scaling``.
    """
    out = np.empty(n_draws)
    for start in range(0, n_draws, block):
        stop = min(n_draws, start + block)
        out[start:stop] = _sample_block(p, stop - start, rng, arm)
    return out


def _sample_block(p: LimitParams, n: int, rng, arm):
    rho1 = clamp_rho(p.cov1, p.diag)
    a1 = correlated_pair(rho1, rng.standard_normal((n, 2)))
    h2, v2, cov2 = limit_params_stage2(p, a1)
    rho2 = clamp_rho(cov2, p.diag)
    a2 = correlated_pair(rho2, rng.standard_normal((n, 2)))
    w = limit_weights(p.weighting, p.q, p.h1, p.v1, h2, v2)
    if arm is not None:
        return w[:, 0, arm] * a1[:, arm] + w[:, 1, arm] * a2[:, arm]
    if p.scaling == "N":
        w = normalize_weights(w)
    return combine(a1, a2, w)


def single_arm_variance(p: LimitParams, arm: int, n_draws: int, rng) -> float:
    """Var of the single-arm limit by Monte Carlo over the first-stage draw.

    E[w̄_1^2 A_1^2] + E[w̄_2^2] - E[w̄_1 A_1]^2: the stage-2 pair is mean-zero
    given the first stage, but w̄_1 can depend on A_1 through H_2, so the
    stage-1 term keeps A_1 inside the expectation and need not be centred.
    """
    rho1 = clamp_rho(p.cov1)
    a1 = correlated_pair(rho1, rng.standard_normal((n_draws, 2)))
    h2, v2, _ = limit_params_stage2(p, a1)
    w = limit_weights(p.weighting, p.q, p.h1, p.v1, h2, v2)
    first = w[:, 0, arm] * a1[:, arm]
    return float(np.mean(first**2 + w[:, 1, arm] ** 2) - np.mean(first) ** 2)


# ---- distances ---------------------------------------------------------


def wasserstein1(xs, ys) -> float:
    """Empirical W1 of equal-size samples: mean |x_(i) - y_(i)|."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(f"wasserstein1 needs equal-length 1-d samples, got {xs.shape} and {ys.shape}")
    return float(np.mean(np.abs(np.sort(xs) - np.sort(ys))))


def ks_distance(xs, ys) -> float:
    """Two-sample Kolmogorov sup-distance between empirical CDFs."""
    return float(stats.ks_2samp(xs, ys).statistic)


def skewness(xs) -> float:
    return float(stats.skew(np.asarray(xs, dtype=float)))
