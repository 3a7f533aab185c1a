"""Plug-in bootstrap for the WIPW tests.

Nuisances (outcome moments, first-stage variances and correlation) are
estimated once from the trial; each bootstrap draw then simulates the limit
experiment with those plug-ins at constant cost: two Gaussian pairs, one
evaluation of the sampling function and two closed-form 2x2 square roots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from .experiment import TrialData
from .limitdist import (
    V_FLOOR,
    Diagnostics,
    LimitParams,
    clamp_rho,
    combine,
    correlated_pair,
    correlation,
    limit_weights,
    normalize_weights,
    sample_limit,
    selection_score,
    weighting_for_m,
    ks_distance,
)
from .selection import SelectionRule, clipped_pair

CLIP_POLICIES = ("design", "limit")


class BootstrapError(ValueError):
    pass


@dataclass
class NuisanceEstimates:
    mu_hat: np.ndarray
    mu2_hat: np.ndarray
    v1_hat: np.ndarray
    cov1_hat: float
    e0: float
    rule: SelectionRule
    q: tuple[float, float]
    weighting: str
    diag: Diagnostics = field(default_factory=Diagnostics)

    @property
    def h1(self) -> np.ndarray:
        return np.array([self.e0, 1.0 - self.e0])

    def h2(self, x) -> np.ndarray:
        """Ĥ2(x, s) for first-stage draws x (n, 2); null signal hard-wired."""
        x = np.atleast_2d(x)
        score = selection_score(x[:, 0], x[:, 1], self.v1_hat[0], self.v1_hat[1], 0.0, self.e0, self.q[0])
        return np.stack([np.asarray(h, dtype=float).reshape(-1) for h in clipped_pair(self.rule, score)], axis=-1)

    def v2(self, x, h2=None) -> np.ndarray:
        h2 = self.h2(x) if h2 is None else h2
        v = self.mu2_hat - h2 * self.mu_hat**2
        low = v < V_FLOOR
        if low.any():
            self.diag.floor_count += int(low.sum())
            v = np.where(low, V_FLOOR, v)
        return v

    def cov2(self, x, h2=None, v2=None) -> np.ndarray:
        h2 = self.h2(x) if h2 is None else h2
        v2 = self.v2(x, h2) if v2 is None else v2
        return correlation(h2[:, 0], h2[:, 1], v2[:, 0], v2[:, 1], self.mu_hat[0], self.mu_hat[1])

    def as_limit_params(self, scaling: str = "U") -> LimitParams:
        return LimitParams(
            c=0.0,
            mean=tuple(self.mu_hat),
            second=tuple(self.mu2_hat),
            e0=self.e0,
            rule=self.rule,
            q=self.q,
            weighting=self.weighting,
            scaling=scaling,
            sigma=float(self.rule.sigma_hat) if self.rule.kind == "enrich_pvalue" else None,
        )


def bootstrap_rule(rule: SelectionRule, data: TrialData, m: float, clip_policy: str = "design") -> SelectionRule:
    """Sampling rule handed to the bootstrap.

    ``design`` plugs in the clip rate actually used to collect the data.
    ``limit`` drops the clip (limit l_N -> 0) for the adaptive weightings and
    keeps it for constant weighting.
    """
    if clip_policy not in CLIP_POLICIES:
        raise ValueError(f"clip_policy must be one of {CLIP_POLICIES}")
    if rule.kind == "enrich_pvalue":
        if data.sigma_hat is None:
            raise BootstrapError("trial carries no sigma_hat for the p-value enrichment rule")
        rule = rule.with_sigma(data.sigma_hat)
    if clip_policy == "limit" and m != 0.0:
        rule = rule.with_clip(0.0)
    return rule


def estimate_nuisance(data: TrialData, m: float, rule: SelectionRule, clip_policy: str = "design") -> NuisanceEstimates:
    report = est.estimate(data, m)
    return nuisance_from_report(report, data, rule, clip_policy)


def nuisance_from_report(report: est.EstimateReport, data: TrialData, rule: SelectionRule, clip_policy="design"):
    diag = Diagnostics()
    mu, mu2 = report.wipw.copy(), report.wipws.copy()
    h1 = np.array([data.e0, 1.0 - data.e0])
    v1 = mu2 - h1 * mu**2
    low = v1 < V_FLOOR
    if low.any():
        diag.floor_count += int(low.sum())
        v1 = np.where(low, V_FLOOR, v1)
    cov1 = clamp_rho(correlation(h1[0], h1[1], v1[0], v1[1], mu[0], mu[1]), diag)
    return NuisanceEstimates(
        mu_hat=mu,
        mu2_hat=mu2,
        v1_hat=v1,
        cov1_hat=float(cov1),
        e0=data.e0,
        rule=bootstrap_rule(rule, data, report.m, clip_policy),
        q=(data.n1 / data.n, data.n2 / data.n),
        weighting=weighting_for_m(report.m),
        diag=diag,
    )


def nuisance_from_params(p: LimitParams) -> NuisanceEstimates:
    """Nuisances equal to the moments in ``p`` (c is ignored; the bootstrap uses c = 0)."""
    mu, mu2 = np.array(p.mean, dtype=float), np.array(p.second, dtype=float)
    return NuisanceEstimates(
        mu_hat=mu,
        mu2_hat=mu2,
        v1_hat=p.v1,
        cov1_hat=float(clamp_rho(p.cov1)),
        e0=p.e0,
        rule=p.resolved_rule,
        q=tuple(p.q),
        weighting=p.weighting,
    )


def bootstrap_draws(nu: NuisanceEstimates, n_draws: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draws for both scalings from one set of Gaussian pairs: {'U': ..., 'N': ...}."""
    s1 = rng.standard_normal((n_draws, 2))
    s2 = rng.standard_normal((n_draws, 2))
    a1 = correlated_pair(nu.cov1_hat, s1)
    h2 = nu.h2(a1)
    v2 = nu.v2(a1, h2)
    rho2 = clamp_rho(nu.cov2(a1, h2, v2), nu.diag)
    a2 = correlated_pair(rho2, s2)
    w = limit_weights(nu.weighting, nu.q, nu.h1, nu.v1_hat, h2, v2)
    return {"U": combine(a1, a2, w), "N": combine(a1, a2, normalize_weights(w))}


def bootstrap_draw(nu: NuisanceEstimates, scaling: str, rng: np.random.Generator) -> float:
    return float(bootstrap_draws(nu, 1, rng)[scaling][0])


def quantile(draws_sorted: np.ndarray, level: float) -> float:
    """Order statistic ceil(level * B) of sorted draws (1-indexed)."""
    b = len(draws_sorted)
    k = min(b, max(1, math.ceil(level * b - 1e-12)))
    return float(draws_sorted[k - 1])


def p_value(draws_sorted: np.ndarray, stat: float) -> float:
    """(1 + #{D >= stat}) / (B + 1)."""
    b = len(draws_sorted)
    n_ge = b - int(np.searchsorted(draws_sorted, stat, side="left"))
    return (1.0 + n_ge) / (b + 1.0)


@dataclass
class BootstrapResult:
    stat: float
    draws: np.ndarray
    quantile: float
    p_value: float
    decision: bool
    abstain: bool = False
    floor_count: int = 0
    clamp_count: int = 0

    def quantile_at(self, level: float) -> float:
        return quantile(np.sort(self.draws), level)


def decide(stat: float, draws: np.ndarray, alpha: float, side: str, diag: Diagnostics | None = None) -> BootstrapResult:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    fc = diag.floor_count if diag else 0
    cc = diag.clamp_count if diag else 0
    if math.isnan(stat):
        return BootstrapResult(stat, draws, math.nan, 1.0, False, True, fc, cc)
    if side == "left":
        stat, draws = -stat, -draws
    srt = np.sort(draws)
    q = quantile(srt, 1.0 - alpha)
    return BootstrapResult(stat, draws, q, p_value(srt, stat), bool(stat > q), False, fc, cc)


def run_test(
    data: TrialData,
    m: float,
    scaling: str,
    alpha: float,
    side: str,
    B: int,
    rng: np.random.Generator,
    rule: SelectionRule,
    clip_policy: str = "design",
) -> BootstrapResult:
    """phi = 1(stat > Q_{1-alpha}(D)) with stat = sqrt(N) T_N ('U') or W_N ('N')."""
    if B < 100:
        raise ValueError("B must be at least 100")
    return run_tests(data, m, alpha, B, rng, rule, clip_policy, sides=(side,), scalings=(scaling,))[scaling, side]


def run_tests(data, m, alpha, B, rng, rule, clip_policy="design", sides=("left", "right"), scalings=("U", "N")):
    """All requested (scaling, side) tests from one bootstrap sample."""
    report = est.estimate(data, m)
    stats = {"U": report.root_n_t, "N": report.w_stat}
    out = {}
    if not report.w_finite:
        for v in scalings:
            for side in sides:
                out[v, side] = BootstrapResult(stats[v], np.empty(0), math.nan, 1.0, False, True)
        return out
    nu = nuisance_from_report(report, data, rule, clip_policy)
    draws = bootstrap_draws(nu, B, rng)
    for v in scalings:
        for side in sides:
            out[v, side] = decide(stats[v], draws[v], alpha, side, nu.diag)
    return out


def true_limit_params(model, design, m: float, scaling: str, clip_policy: str = "design") -> LimitParams:
    """Limit law at c = 0 with the model's exact moments (the bootstrap's target)."""
    rule = design.rule
    if clip_policy == "limit" and m != 0.0:
        rule = rule.with_clip(0.0)
    return LimitParams.from_model(
        model, rule, design.e0, 0.0, q=design.q, weighting=weighting_for_m(m), scaling=scaling
    )


def bootstrap_cdf_agreement(data: TrialData, model, design, m: float, B: int, n_ref: int, rng_boot, rng_ref, clip_policy="design"):
    """Sup-distance between the bootstrap CDF and the true-nuisance limit CDF, per scaling."""
    nu = estimate_nuisance(data, m, design.rule, clip_policy)
    draws = bootstrap_draws(nu, B, rng_boot)
    out = {}
    for v in ("U", "N"):
        ref = sample_limit(true_limit_params(model, design, m, v, clip_policy), n_ref, rng_ref)
        out[v] = ks_distance(draws[v], ref)
    return out
