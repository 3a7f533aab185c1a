"""Sampling functions for the follow-up stage and the clipping rule.

The argument ``x`` is always the interim difference S1(0) - S1(1). Every
function here accepts scalars or numpy arrays and may receive ``-inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

KINDS = ("thompson", "eps_greedy", "enrich_effect", "enrich_pvalue")


@dataclass(frozen=True)
class SelectionRule:
    """Sampling function ē(s, x) plus the clipping rate ``clip`` (l_N).

    ``sigma_hat`` is only read by ``enrich_pvalue``; it is either a positive
    number or the string ``"estimate"``, in which case the trial resolves it
    from pilot data (see ``experiment.pilot_sigma_hat``).
    """

    kind: str
    clip: float = 0.0
    beta: float = 0.0
    alpha_sel: float = 0.05
    sigma_hat: float | str = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.clip < 0.5:
            raise ValueError(f"clip l_N={self.clip} must lie in [0, 1/2)")
        if self.kind == "enrich_pvalue":
            if not 0.0 < self.alpha_sel < 0.5:
                raise ValueError("alpha_sel must lie in (0, 1/2)")
            if self.sigma_hat != "estimate" and not float(self.sigma_hat) > 0:
                raise ValueError("sigma_hat must be positive or 'estimate'")

    @property
    def needs_sigma(self) -> bool:
        return self.kind == "enrich_pvalue" and self.sigma_hat == "estimate"

    def with_sigma(self, sigma: float) -> "SelectionRule":
        return replace(self, sigma_hat=float(sigma))

    def with_clip(self, clip: float) -> "SelectionRule":
        return replace(self, clip=float(clip))

    @property
    def n_levels(self) -> int | None:
        """Number of distinct raw values for step rules (None for Thompson)."""
        return {"thompson": None, "eps_greedy": 2, "enrich_effect": 2, "enrich_pvalue": 3}[self.kind]

    def raw(self, arm: int, x):
        p0 = _raw_arm0(self, x)
        return p0 if arm == 0 else 1.0 - p0

    def clipped(self, arm: int, x):
        return eval_clipped(self, arm, x)


def _raw_arm0(rule: SelectionRule, x):
    x = np.asarray(x, dtype=float)
    if rule.kind == "thompson":
        out = ndtr(x)
    elif rule.kind == "eps_greedy":
        out = (x >= 0.0).astype(float)
    elif rule.kind == "enrich_effect":
        out = (x >= rule.beta).astype(float)
    else:
        if rule.sigma_hat == "estimate":
            raise ValueError("enrich_pvalue rule has unresolved sigma_hat='estimate'; call with_sigma() first")
        p_left = ndtr(x / float(rule.sigma_hat))
        a = rule.alpha_sel
        out = np.where(p_left < a, 1.0, np.where(p_left > 1.0 - a, 0.0, 0.5))
    return out if out.ndim else float(out)


def eval_raw(rule: SelectionRule, arm: int, x):
    """Raw sampling probability ē(arm, x) before clipping."""
    if arm not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    return rule.raw(arm, x)


def clipped_pair(rule: SelectionRule, x):
    """(arm 0, arm 1) clipped probabilities at x.

    The smaller raw probability is clipped directly and the other is its
    complement, so the floor l_N and the sum to one both hold exactly.
    """
    raw0 = np.asarray(_raw_arm0(rule, x), dtype=float)
    low0 = raw0 <= 0.5
    small = np.minimum(1.0 - rule.clip, np.maximum(rule.clip, np.where(low0, raw0, 1.0 - raw0)))
    p0 = np.where(low0, small, 1.0 - small)
    p1 = np.where(low0, 1.0 - small, small)
    if p0.ndim == 0:
        return float(p0), float(p1)
    return p0, p1


def eval_clipped(rule: SelectionRule, arm: int, x):
    """min{1 - l_N, max{l_N, ē(arm, x)}}."""
    if arm not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    return clipped_pair(rule, x)[arm]


def eval_at_minus_infinity(rule: SelectionRule, arm: int) -> float:
    return float(eval_raw(rule, arm, -math.inf))


def from_config(section: dict, epsilon: float | None = None) -> SelectionRule:
    section = dict(section)
    kind = section.pop("kind", None)
    if kind is None:
        raise ValueError("selection section needs a 'kind' key")
    clip = section.pop("l_n", 0.0)
    if epsilon is not None:
        clip = epsilon / 2.0
    rule = SelectionRule(
        kind=kind,
        clip=float(clip),
        beta=float(section.pop("beta", 0.0)),
        alpha_sel=float(section.pop("alpha_sel", 0.05)),
        sigma_hat=section.pop("sigma_hat", 1.0),
    )
    if section:
        raise ValueError(f"unknown selection keys: {sorted(section)}")
    return rule
