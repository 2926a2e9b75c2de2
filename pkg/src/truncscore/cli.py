"""Command-line interface: ``truncscore {simulate,estimate,test,replicate,curves}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .data import COLUMNS, read_csv, write_csv
from .estimators import estimate_truncatedscore
from .exceptions import TruncScoreError
from .numerics import RandomSource
from .simulation import SCENARIOS, exact_truth, get_scenario, null_scenario, replicate_study, simulate_dataset
from .testing import TestConfig, closed_test, critical_value, power_comparison

THREADS_ENV = "TRUNCSCORE_THREADS"


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _nonneg_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _rho_grid(text):
    """Comma list (``0,0.3,0.57``) or range ``start:stop:step`` (stop included)."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ValueError
            values = np.arange(start, stop + step / 2, step)
        else:
            values = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse correlation grid {text!r}") from None
    if values.size == 0 or np.any(np.abs(values) >= 1):
        raise argparse.ArgumentTypeError("correlations must lie strictly inside (-1, 1)")
    return [round(float(v), 12) for v in values]


def _schema(text):
    mapping = {}
    for part in text.split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"schema entries look like logical=column, got {part!r}")
        key, col = (s.strip() for s in part.split("=", 1))
        if key not in COLUMNS:
            raise argparse.ArgumentTypeError(f"unknown logical column {key!r}")
        mapping[key] = col
    return mapping


def build_parser():
    parser = argparse.ArgumentParser(prog="truncscore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--scenario", default="table1",
                       help=f"built-in ({', '.join(SCENARIOS)}) or a scenario JSON file")
        p.add_argument("--null", action="store_true", help="generate both arms from arm-0 parameters")
        p.add_argument("--seed", type=_seed, required=True)

    def data_args(p):
        p.add_argument("--data", required=True, help="input CSV")
        p.add_argument("--schema", type=_schema, help="column mapping, e.g. a=treat,y=score")
        p.add_argument("--tau", type=_positive_float, default=2.0)
        p.add_argument("--method", choices=("naive", "adjusted", "both"), default="adjusted")
        p.add_argument("--json", dest="json_out", help="write the structured result here")

    p = sub.add_parser("simulate", help="draw a dataset from a scenario")
    scenario_args(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="estimate the landmark contrasts")
    data_args(p)

    p = sub.add_parser("test", help="one-sided, intersection and closed tests")
    data_args(p)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--delta-y", type=_nonneg_float, default=0.0, help="superiority margin for the score")
    p.add_argument("--delta-t", type=_nonneg_float, default=0.0, help="non-inferiority margin for the risk")

    p = sub.add_parser("replicate", help="simulation study of estimators and tests")
    scenario_args(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--reps", type=_positive_int, required=True)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--delta-y", type=_nonneg_float, default=0.0)
    p.add_argument("--delta-t", type=_nonneg_float, default=0.0)
    p.add_argument("--truth", choices=("quadrature", "monte-carlo"), default="quadrature")
    p.add_argument("--truth-reps", type=_positive_int, default=10**7)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("curves", help="critical-value and power-comparison curves")
    p.add_argument("--rho", type=_rho_grid, default=_rho_grid("-0.9:0.9:0.05"))
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--target", type=float, default=0.8)
    p.add_argument("--reps", type=_positive_int, default=10**6)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out-dir", required=True)
    return parser


# ---------------------------------------------------------------------------

def _scenario(args):
    sp = get_scenario(args.scenario)
    return null_scenario(sp) if args.null else sp


def cmd_simulate(args):
    sp = _scenario(args)
    d = simulate_dataset(sp, args.n, RandomSource(args.seed))
    write_csv(d, args.out)
    n1 = int(d.a.sum())
    print(f"wrote {d.n} rows to {args.out} (arm 0: {d.n - n1}, arm 1: {n1})")
    return 0


def _estimate(args):
    d = read_csv(args.data, args.schema)
    return d, estimate_truncatedscore(d, args.tau, args.method)


def cmd_estimate(args):
    _, results = _estimate(args)
    docs = {}
    for method, res in results.items():
        if len(results) > 1:
            print(f"== {method} ==")
        print(report.estimate_table(res), end="")
        docs[method] = res.to_dict()
    if args.json_out:
        Path(args.json_out).write_text(report.dumps(docs), encoding="utf-8")
    return 0


def cmd_test(args):
    cfg = TestConfig(alpha=args.alpha, delta_y=args.delta_y, delta_t=args.delta_t)
    _, results = _estimate(args)
    docs = {}
    for method, res in results.items():
        ct = closed_test(res, cfg)
        if len(results) > 1:
            print(f"== {method} ==")
        print(report.summary_text(res, ct), end="")
        print(report.decisions_text(ct), end="")
        docs[method] = report.result_document(res, ct)
    if args.json_out:
        Path(args.json_out).write_text(report.dumps(docs), encoding="utf-8")
    return 0


def _write_rows(path, rows, fields):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


SUMMARY_FIELDS = ["method", "parameter", "Mean", "Bias", "SE", "SD", "SE/SD", "Coverage",
                  "Rel.eff", "SE.ratio", "Var.ratio"]


def write_campaign(summary, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "summary.csv", summary.rows, SUMMARY_FIELDS)
    power = [dict(r, n=summary.n) for r in summary.power if r["procedure"] != "signed-wald"]
    _write_rows(out / "power.csv", power, ["method", "procedure", "n", "H_Y", "H_T", "both", "either"])
    type1 = [dict(r, n=summary.n) for r in summary.power if r["procedure"] == "signed-wald"]
    _write_rows(out / "type1.csv", type1, ["method", "n", "intersection", "H_Y", "H_T"])
    (out / "campaign.json").write_text(report.dumps(summary.to_dict()), encoding="utf-8")


def cmd_replicate(args):
    sp = _scenario(args)
    cfg = TestConfig(alpha=args.alpha, delta_y=args.delta_y, delta_t=args.delta_t)
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1"))
    rs = RandomSource(args.seed)
    if args.truth == "quadrature":
        truth = exact_truth(sp)
    else:
        from .simulation import truth_oracle
        truth = truth_oracle(sp, args.truth_reps, rs.child(2**31))

    def progress(done, total, elapsed):
        if done % 100 == 0 or done == total:
            logging.getLogger("truncscore").info("%d/%d replicates (%.0fs)", done, total, elapsed)

    summary = replicate_study(sp, args.n, args.reps, cfg, rs, truth=truth, threads=threads, progress=progress)
    write_campaign(summary, args.out_dir)
    for row in summary.rows:
        print(f"{row['method']:>8} {row['parameter']:<5} " + " ".join(
            f"{k}={row[k]:.4f}" for k in SUMMARY_FIELDS[2:]))
    print(f"completed {summary.completed} of {args.reps} replicates, {summary.failures} failed")
    return 130 if summary.interrupted else 0


def cmd_curves(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rs = RandomSource(args.seed)
    crit = [{"rho": r, "value": critical_value(r, args.alpha)} for r in args.rho]
    _write_rows(out / "critical_values.csv", crit, ["rho", "value"])
    for k, mode in enumerate(("conjunctive", "disjunctive")):
        rows = []
        for j, r in enumerate(args.rho):
            r_star, prop, holm = power_comparison(r, args.alpha, mode, args.target, args.reps,
                                                  rs.child(k).child(j))
            rows.append({"rho": r, "r": r_star, "proposed": prop, "holm": holm})
        _write_rows(out / f"power_{mode}.csv", rows, ["rho", "r", "proposed", "holm"])
    print(f"wrote curves for {len(args.rho)} correlations to {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "test": cmd_test,
    "replicate": cmd_replicate,
    "curves": cmd_curves,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (TruncScoreError, OSError, json.JSONDecodeError) as exc:
        print(f"truncscore {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
