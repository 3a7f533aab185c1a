"""TOML run configuration.

Schema (every section optional unless the subcommand needs it)::

    seed = 0                     # master seed
    threads = 1

    [outcome]                    # family plus that family's parameters
    family = "gaussian"
    mu0 = 0.0
    var0 = 1.0
    mu1 = 0.0
    var1 = 0.25

    [design]
    n1 = 500
    n2 = 500
    e0 = 0.5
    m = 0.5                      # weighting used by `simulate`

    [selection]
    kind = "thompson"            # thompson | eps_greedy | enrich_effect | enrich_pvalue
    l_n = 0.05
    # beta, alpha_sel, sigma_hat (number or "estimate")

    [study]
    theta = [0.0]
    epsilon = [0.1]              # clip l_N = epsilon / 2; default 2 * l_n
    methods = ["constant_U", "constant_N", "adaptive_U", "adaptive_N", "sample_split"]
    reps = 2000
    B = 2000
    alpha = 0.05
    sides = ["right"]
    clip_policy = "design"

    [histogram]
    c = [0.0, -5.0, -10.0, -15.0]
    reps = 5000
    m = 0.5

    [semisynthetic]
    data = "data/standin.csv"
    permutations = 500
    eta = [0.0, 0.015, 0.03, 0.045, 0.06]
    epsilon = [0.1, 0.2, 0.4]
    n1 = 1000
    n2 = 1000
    alpha = 0.05
    side = "right"
    B = 2000
    replace = false
    methods = [...]
    clip_policy = "design"

    [output]
    dir = "results"

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import outcomes, selection
from .experiment import ConfigError, DesignConfig
from .montecarlo import FIVE_TESTS, HistogramConfig, StudyConfig
from .outcomes import OutcomeModelError
from .semisynthetic import SemiConfig

TOP_KEYS = {"seed", "threads", "outcome", "design", "selection", "study", "histogram", "semisynthetic", "output"}
DESIGN_KEYS = {"n1", "n2", "e0", "m"}
STUDY_KEYS = {"theta", "epsilon", "methods", "reps", "B", "alpha", "sides", "clip_policy"}
HISTOGRAM_KEYS = {"c", "reps", "m"}
SEMI_KEYS = {
    "data",
    "permutations",
    "eta",
    "epsilon",
    "n1",
    "n2",
    "alpha",
    "side",
    "B",
    "replace",
    "methods",
    "clip_policy",
}
OUTPUT_KEYS = {"dir"}


def _check_keys(section: dict, allowed: set, name: str):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"[{name}] has unknown keys {sorted(extra)}; allowed: {sorted(allowed)}")


def _floats(xs, name):
    if not isinstance(xs, list) or not xs:
        raise ConfigError(f"{name} must be a nonempty list of numbers")
    return tuple(float(x) for x in xs)


@dataclass
class RunConfig:
    raw: dict
    seed: int = 0
    threads: int = 1
    model: outcomes.OutcomeModel | None = None
    design: DesignConfig | None = None
    study: StudyConfig | None = None
    histogram: HistogramConfig | None = None
    semi: SemiConfig | None = None
    semi_data: str | None = None
    output_dir: str = "."
    notes: list = field(default_factory=list)

    def require(self, *names):
        for n in names:
            if getattr(self, n) is None:
                raise ConfigError(f"config is missing the section needed here: {n}")


def parse(doc: dict, base_dir: str = ".") -> RunConfig:
    """Build and validate a RunConfig; raises ConfigError with the reason."""
    _check_keys(doc, TOP_KEYS, "top level")
    cfg = RunConfig(raw=doc, seed=int(doc.get("seed", 0)), threads=int(doc.get("threads", 1)))
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")

    if "outcome" in doc:
        try:
            cfg.model = outcomes.from_config(doc["outcome"])
            cfg.model.check_moments()
        except OutcomeModelError as exc:
            raise ConfigError(f"[outcome] {exc}") from exc

    rule = None
    if "selection" in doc:
        try:
            rule = selection.from_config(doc["selection"])
        except ValueError as exc:
            raise ConfigError(f"[selection] {exc}") from exc

    if "design" in doc:
        d = doc["design"]
        _check_keys(d, DESIGN_KEYS, "design")
        if rule is None:
            raise ConfigError("[design] needs a [selection] section")
        cfg.design = DesignConfig(
            n1=int(d.get("n1", 500)),
            n2=int(d.get("n2", 500)),
            e0=float(d.get("e0", 0.5)),
            rule=rule,
            m=float(d.get("m", 0.5)),
            seed=cfg.seed,
        )
        cfg.notes += cfg.design.validate()

    if "study" in doc:
        s = doc["study"]
        _check_keys(s, STUDY_KEYS, "study")
        cfg.require("design", "model")
        eps = _floats(s["epsilon"], "[study] epsilon") if "epsilon" in s else (2.0 * cfg.design.rule.clip,)
        cfg.study = StudyConfig(
            design=cfg.design,
            model=cfg.model,
            theta_grid=_floats(s.get("theta", [0.0]), "[study] theta"),
            epsilon_grid=eps,
            methods=tuple(s.get("methods", FIVE_TESTS)),
            reps=int(s.get("reps", 2000)),
            B=int(s.get("B", 2000)),
            alpha=float(s.get("alpha", 0.05)),
            sides=tuple(s.get("sides", ["right"])),
            master_seed=cfg.seed,
            clip_policy=s.get("clip_policy", "design"),
            threads=cfg.threads,
        )
        cfg.notes += cfg.study.validate()

    if "histogram" in doc:
        h = doc["histogram"]
        _check_keys(h, HISTOGRAM_KEYS, "histogram")
        cfg.require("design", "model")
        cfg.histogram = HistogramConfig(
            design=cfg.design,
            model=cfg.model,
            c_grid=_floats(h.get("c", [0.0, -5.0, -10.0, -15.0]), "[histogram] c"),
            reps=int(h.get("reps", 5000)),
            m=float(h.get("m", 0.5)),
            master_seed=cfg.seed,
            threads=cfg.threads,
        )
        cfg.notes += cfg.histogram.validate()

    if "semisynthetic" in doc:
        s = dict(doc["semisynthetic"])
        _check_keys(s, SEMI_KEYS, "semisynthetic")
        data = s.pop("data", None)
        if data is not None:
            cfg.semi_data = data if os.path.isabs(data) else os.path.join(base_dir, data)
        kw = {}
        for key, name in (("permutations", "permutations"), ("n1", "n1"), ("n2", "n2"), ("B", "B")):
            if key in s:
                kw[name] = int(s[key])
        if "eta" in s:
            kw["eta_grid"] = _floats(s["eta"], "[semisynthetic] eta")
        if "epsilon" in s:
            kw["epsilon_grid"] = _floats(s["epsilon"], "[semisynthetic] epsilon")
        for key in ("alpha",):
            if key in s:
                kw[key] = float(s[key])
        for key in ("side", "clip_policy"):
            if key in s:
                kw[key] = s[key]
        if "replace" in s:
            kw["replace"] = bool(s["replace"])
        if "methods" in s:
            kw["methods"] = tuple(s["methods"])
        cfg.semi = SemiConfig(master_seed=cfg.seed, threads=cfg.threads, **kw)
        cfg.notes += cfg.semi.validate()

    if "output" in doc:
        _check_keys(doc["output"], OUTPUT_KEYS, "output")
        cfg.output_dir = doc["output"].get("dir", ".")
    return cfg


def load(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def with_overrides(cfg: RunConfig, seed: int | None = None, threads: int | None = None) -> RunConfig:
    """Re-parse with command-line seed/threads taking precedence."""
    doc = dict(cfg.raw)
    if seed is not None:
        doc["seed"] = seed
    if threads is not None:
        doc["threads"] = threads
    semi_dir = os.path.dirname(cfg.semi_data) if cfg.semi_data else "."
    if cfg.semi_data and "semisynthetic" in doc:
        doc["semisynthetic"] = dict(doc["semisynthetic"], data=cfg.semi_data)
    return parse(doc, base_dir=semi_dir)
