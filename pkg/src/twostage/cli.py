"""Command-line entry point: ``twostage <subcommand> [options]``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import bootstrap as bs
from . import config as cfgmod
from . import estimators as est
from . import montecarlo as mc
from . import rng as rngmod
from . import semisynthetic as semi
from .experiment import ConfigError, TrialData, interim_statistic, run_trial
from .limitdist import LimitParams, sample_limit, weighting_for_m
from .outcomes import OutcomeModel
from .selection import SelectionRule

log = logging.getLogger("twostage")

TRIAL_FIELDS = ("stage", "arm", "outcome")
TEST_FIELDS = ("t_stat", "w_stat", "quantile", "p_value", "decision", "abstain", "floor_count", "clamp_count")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---- trial CSV with a metadata line ------------------------------------


def write_trial(path: str, data: TrialData, rule: SelectionRule):
    meta = {
        "e0": repr(data.e0),
        "p2_arm0": repr(data.p2_arm0),
        "kind": rule.kind,
        "l_n": repr(rule.clip),
        "beta": repr(rule.beta),
        "alpha_sel": repr(rule.alpha_sel),
        "sigma_hat": repr(data.sigma_hat) if data.sigma_hat is not None else "none",
    }
    with _open_out(path) as fh:
        fh.write("# " + ",".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_FIELDS)
        for t, a, y in ((1, data.a1, data.y1), (2, data.a2, data.y2)):
            for ai, yi in zip(a.tolist(), y.tolist()):
                w.writerow([t, ai, repr(float(yi))])


def read_trial(path: str) -> tuple[TrialData, SelectionRule | None]:
    """Parse a trial CSV: '# key=value,...' line, then stage,arm,outcome rows."""
    if not os.path.isfile(path):
        raise ConfigError(f"no such trial file: {path}")
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigError(f"{path}: first line must be '# e0=...,p2_arm0=...'")
        meta = dict(kv.split("=", 1) for kv in first[1:].strip().split(",") if "=" in kv)
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(TRIAL_FIELDS):
            raise ConfigError(f"{path}: header must be {','.join(TRIAL_FIELDS)}")
        rows = [(int(r["stage"]), int(r["arm"]), float(r["outcome"])) for r in reader]
    for key in ("e0", "p2_arm0"):
        if key not in meta:
            raise ConfigError(f"{path}: metadata line lacks {key}")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if not np.isin(arr[:, 0], (1, 2)).all() or not np.isin(arr[:, 1], (0, 1)).all():
        raise ConfigError(f"{path}: stage must be 1/2 and arm 0/1")
    s1, s2 = arr[:, 0] == 1, arr[:, 0] == 2
    a1, y1 = arr[s1, 1].astype(np.int8), arr[s1, 2]
    a2, y2 = arr[s2, 1].astype(np.int8), arr[s2, 2]
    e0 = float(meta["e0"])
    sigma = meta.get("sigma_hat", "none")
    sigma = None if sigma == "none" else float(sigma)
    data = TrialData(a1, y1, a2, y2, e0=e0, p2_arm0=float(meta["p2_arm0"]), s1=interim_statistic(a1, y1, e0), sigma_hat=sigma)
    rule = None
    if "kind" in meta:
        rule = SelectionRule(
            kind=meta["kind"],
            clip=float(meta.get("l_n", 0.0)),
            beta=float(meta.get("beta", 0.0)),
            alpha_sel=float(meta.get("alpha_sel", 0.05)),
            sigma_hat=sigma if sigma is not None else 1.0,
        )
    return data, rule


def _open_out(path: str):
    if path in (None, "-"):
        return _Stdout()
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def _emit_record(record: dict, fmt: str, path: str | None):
    with _open_out(path) as fh:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(record))
            w.writerow([mc._fmt(v) for v in record.values()])
        else:
            fh.write(json.dumps(record, indent=2) + "\n")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _json_safe(float(v))
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


# ---- subcommands --------------------------------------------------------


def _config(args) -> cfgmod.RunConfig:
    if not args.config:
        raise ConfigError("this subcommand needs --config")
    cfg = cfgmod.load(args.config)
    if args.seed is not None or args.threads is not None:
        cfg = cfgmod.with_overrides(cfg, seed=args.seed, threads=args.threads)
    for note in cfg.notes:
        log.warning(note)
    return cfg


def _out_path(args, cfg, default_name):
    if args.out:
        return args.out
    base = cfg.output_dir if cfg is not None else "."
    return os.path.join(base, default_name)


def cmd_validate(args):
    cfg = _config(args)
    sections = [k for k in ("outcome", "design", "selection", "study", "histogram", "semisynthetic", "output") if k in cfg.raw]
    _emit_record({"valid": True, "sections": ",".join(sections), "warnings": " | ".join(cfg.notes)}, args.format, None)


def cmd_simulate(args):
    cfg = _config(args)
    cfg.require("design", "model")
    g = rngmod.rep_streams(cfg.seed, 0, args.rep)
    data = run_trial(cfg.design, cfg.model, g)
    out = _out_path(args, cfg, "trial.csv")
    write_trial(out, data, cfg.design.rule)
    rep = est.estimate(data, cfg.design.m)
    log.info("wrote %d units to %s", data.n, out)
    summary = {
        "n": data.n,
        "p2_arm0": data.p2_arm0,
        "m": cfg.design.m,
        "wipw0": float(rep.wipw[0]),
        "wipw1": float(rep.wipw[1]),
        "t_stat": rep.t_stat,
        "w_stat": rep.w_stat,
    }
    _emit_record({k: _json_safe(v) for k, v in summary.items()}, args.format, None)


def cmd_test(args):
    data, rule = read_trial(args.data)
    if args.config:
        cfg = _config(args)
        if cfg.design is not None:
            rule = cfg.design.rule
    if rule is None:
        raise ConfigError("selection rule unknown: add kind=... to the metadata line or pass --config")
    if args.m not in (0.0, 0.5, 1.0):
        raise ConfigError("--m must be 0, 0.5 or 1")
    if args.B < 100:
        raise ConfigError("--B must be at least 100")
    seed = 0 if args.seed is None else args.seed
    g = rngmod.boot_stream(seed, 0, 0, f"m={args.m}")
    res = bs.run_test(data, args.m, args.scaling, args.alpha, args.side, args.B, g, rule, args.clip_policy)
    report = est.estimate(data, args.m)
    record = {
        "t_stat": report.t_stat,
        "w_stat": report.w_stat,
        "quantile": res.quantile,
        "p_value": res.p_value,
        "decision": bool(res.decision),
        "abstain": bool(res.abstain),
        "floor_count": res.floor_count,
        "clamp_count": res.clamp_count,
    }
    _emit_record({k: _json_safe(v) for k, v in record.items()}, args.format, args.out)


def cmd_study(args):
    cfg = _config(args)
    cfg.require("study")
    res = mc.run_study(cfg.study, threads=cfg.threads)
    out = _out_path(args, cfg, "study.csv")
    res.write(out)
    root, ext = os.path.splitext(out)
    res.write_pvalues(root + "_pvalues" + (ext or ".csv"))
    log.info("wrote %s", out)


def cmd_qq(args):
    cfg = _config(args)
    cfg.require("study")
    rows, abstained = mc.qq_data(cfg.study, threads=cfg.threads)
    out = _out_path(args, cfg, "qq.csv")
    mc.write_csv(out, mc.QQ_FIELDS, rows)
    summary = {"rows": len(rows), "abstentions": sum(abstained.values())}
    _emit_record(summary, args.format, None)


def _appendix_limit_params(c, m, scaling):
    model = OutcomeModel.gaussian(0.0, 1.0, 0.0, 9.0)
    return LimitParams.from_model(model, SelectionRule("eps_greedy", 0.025), 0.5, c, weighting=weighting_for_m(m), scaling=scaling)


def cmd_limit_sample(args):
    c = -math.inf if args.c in ("-inf", "-infinity") else float(args.c)
    if c > 0:
        raise ConfigError("--c must be <= 0 (or -inf)")
    if args.draws < 1:
        raise ConfigError("--draws must be >= 1")
    if args.config:
        cfg = _config(args)
        cfg.require("design", "model")
        p = LimitParams.from_model(
            cfg.model,
            cfg.design.rule,
            cfg.design.e0,
            c,
            q=cfg.design.q,
            weighting=weighting_for_m(args.m if args.m is not None else cfg.design.m),
            scaling=args.scaling,
        )
        seed = cfg.seed
    else:
        p = _appendix_limit_params(c, 0.5 if args.m is None else args.m, args.scaling)
        seed = 0 if args.seed is None else args.seed
    draws = sample_limit(p, args.draws, rngmod.stream(seed, rngmod.LIMIT))
    out = args.out or "limit.csv"
    mc.write_csv(out, ("w",), [{"w": float(v)} for v in draws])
    if p.diag.clamp_count or p.diag.floor_count:
        log.warning("numerical guards applied: %d clamps, %d floors", p.diag.clamp_count, p.diag.floor_count)


def cmd_histogram(args):
    cfg = _config(args)
    cfg.require("histogram")
    draws = mc.sampling_histogram(cfg.histogram, threads=cfg.threads)
    out = _out_path(args, cfg, "histogram.csv")
    mc.write_csv(out, ("c_n", "rep", "value"), mc.histogram_rows(draws))


def cmd_semisynthetic(args):
    cfg = _config(args)
    cfg.require("semi")
    path = args.data or cfg.semi_data
    if not path:
        raise ConfigError("no input data: set [semisynthetic] data or pass --data")
    try:
        data = semi.TrialCsv.load(path)
    except (semi.TrialCsvError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    res = semi.run_semisynthetic(cfg.semi, data, threads=cfg.threads)
    out = _out_path(args, cfg, "semisynthetic.csv")
    res.write(out)
    root, ext = os.path.splitext(out)
    res.write_pvalues(root + "_pvalues" + (ext or ".csv"))


def cmd_gen_data(args):
    if not 0.0 < args.rate < 1.0:
        raise ConfigError("--rate must lie in (0, 1)")
    seed = 0 if args.seed is None else args.seed
    data = semi.standin_data(args.n_per_group, (args.rate, args.rate), rngmod.stream(seed, rngmod.MISC))
    out = args.out or "standin.csv"
    data.write(out)
    _emit_record({"path": out, "n": data.n, "event_rate": data.event_rate(), "control_zeros": data.control_zeros}, args.format, None)


# ---- parser -------------------------------------------------------------


def build_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=None, help="worker processes; results do not depend on it")
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="format of single-record output")
    common.add_argument("--config", default=None, help="TOML run configuration")
    common.add_argument("-v", "--verbose", action="store_true")

    p = Parser(prog="twostage", description="Inference on two-stage adaptive experiments.")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=Parser)
    sub.required = True

    s = sub.add_parser("validate-config", parents=[common], help="check a config against the modelling assumptions")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", parents=[common], help="simulate one two-stage trial to CSV")
    s.add_argument("--rep", type=int, default=0, help="replication index used for the random streams")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("test", parents=[common], help="bootstrap test on a trial CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--m", type=float, default=0.5)
    s.add_argument("--scaling", choices=("U", "N"), default="U")
    s.add_argument("--side", choices=("left", "right"), default="right")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--B", type=int, default=5000)
    s.add_argument("--clip-policy", choices=bs.CLIP_POLICIES, default="design")
    s.set_defaults(func=cmd_test)

    s = sub.add_parser("study", parents=[common], help="rejection-rate grid study")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("qq", parents=[common], help="sorted p-values against uniform quantiles")
    s.set_defaults(func=cmd_qq)

    s = sub.add_parser("limit-sample", parents=[common], help="draws from the limit law")
    s.add_argument("--c", default="0", help="limiting signal c <= 0; write --c=-inf for the strong-signal limit")
    s.add_argument("--draws", type=int, default=100000)
    s.add_argument("--m", type=float, default=None)
    s.add_argument("--scaling", choices=("U", "N"), default="U")
    s.set_defaults(func=cmd_limit_sample)

    s = sub.add_parser("histogram", parents=[common], help="finite-N draws of sqrt(N) T_N - c_N")
    s.set_defaults(func=cmd_histogram)

    s = sub.add_parser("semisynthetic", parents=[common], help="permutation study on a trial CSV")
    s.add_argument("--data", default=None, help="unit_id,group,outcome CSV (overrides the config)")
    s.set_defaults(func=cmd_semisynthetic)

    s = sub.add_parser("gen-semisynthetic-data", parents=[common], help="write a synthetic stand-in trial CSV")
    s.add_argument("--n-per-group", type=int, default=4680)
    s.add_argument("--rate", type=float, default=0.09)
    s.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
