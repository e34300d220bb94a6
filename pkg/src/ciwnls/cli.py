"""Command-line surface: graph generation, audits, covariances, simulation.

Exit codes: 0 success, 1 validation error (bad flags, files, or config),
2 numerical failure.  Diagnostics go to stderr; data goes to files or stdout.
The CIWNLS_OUTPUT_DIR environment variable supplies a default output
directory when --out-dir is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .audit import audit_report_to_json, run_audit
from .centralized import (
    InfeasibleGainError,
    SingularInformationError,
    covariance_report,
    covariance_report_to_json,
)
from .estimator import NumericalDivergenceError
from .graph import generate_random_geometric, graph_to_json
from .harness import EnsembleError, ExperimentConfig, reproduce_paper_experiment, \
    run_monte_carlo
from .sensing import feasible_set_from_json, model_from_json

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

_NUMERICAL_ERRORS = (NumericalDivergenceError, SingularInformationError,
                     InfeasibleGainError, EnsembleError)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for numerical
    # failures, so route usage problems through exit code 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _ValidationExit(message)


class _ValidationExit(Exception):
    pass


def _read(path: str, what: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _ValidationExit(f"cannot read {what} file {path!r}: {exc}")


def _default_out_dir(value):
    if value is not None:
        return value
    return os.environ.get("CIWNLS_OUTPUT_DIR")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ciwnls",
                description="consensus+innovations distributed estimation toolkit")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("graph-gen",
                       help="generate a connected random geometric graph")
    g.add_argument("--n", type=int, required=True, help="number of agents")
    g.add_argument("--radius", type=float, required=True,
                   help="connection radius on the unit square")
    g.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    g.add_argument("--out", default=None,
                   help="output JSON path (default: stdout)")

    a = sub.add_parser("audit",
                       help="audit model assumptions over a feasible set")
    a.add_argument("--model", required=True, help="sensing-model JSON file")
    a.add_argument("--set", dest="feasible", required=True,
                   help="feasible-set JSON file")
    a.add_argument("--samples", type=int, default=10000,
                   help="pair-sample count (default 10000)")
    a.add_argument("--seed", type=int, default=0, help="audit seed (default 0)")
    a.add_argument("--out", default=None, help="write AuditReport JSON here")

    c = sub.add_parser("covariance",
                       help="closed-form asymptotic covariance comparison")
    c.add_argument("--model", required=True, help="sensing-model JSON file")
    c.add_argument("--set", dest="feasible", default=None,
                   help="feasible-set JSON file (optional, for context only)")
    c.add_argument("--theta", required=True,
                   help="evaluation point, comma-separated floats")
    c.add_argument("--a", type=float, required=True, help="innovation constant")
    c.add_argument("--n-agents", type=int, default=None,
                   help="expected agent count (validated against the model)")
    c.add_argument("--out", default=None, help="write CovarianceReport JSON here")

    s = sub.add_parser("simulate",
                       help="run a Monte Carlo ensemble from a config file")
    s.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    s.add_argument("--trials", type=int, default=None, help="override trial count")
    s.add_argument("--horizon", type=int, default=None, help="override horizon")
    s.add_argument("--out-dir", default=None,
                   help="output directory (default: config value or "
                        "CIWNLS_OUTPUT_DIR)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--quiet", action="store_true", help="suppress progress")

    r = sub.add_parser("reproduce-paper",
                       help="run the published 10-agent benchmark preset")
    r.add_argument("--out-dir", default=None,
                   help="output directory (default: CIWNLS_OUTPUT_DIR or "
                        "./benchmark_out)")
    r.add_argument("--trials", type=int, default=250,
                   help="Monte Carlo trials (default 250)")
    r.add_argument("--horizon", type=int, default=5000,
                   help="epochs per trial (default 5000)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--quiet", action="store_true", help="suppress progress")
    return p


def _cmd_graph_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    g = generate_random_geometric(args.n, args.radius, rng)
    text = graph_to_json(g)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out} (fiedler={g.fiedler:.6g})", file=sys.stderr)
    else:
        print(text)
    return EXIT_OK


def _cmd_audit(args) -> int:
    model = model_from_json(_read(args.model, "--model"))
    feasible = feasible_set_from_json(_read(args.feasible, "--set"))
    report = run_audit(model, feasible, pair_samples=args.samples, seed=args.seed)
    rows = [
        ("closed convex set (M1)", feasible.kind in ("box", "whole-space"), ""),
        ("global observability (M2)", report.observability_ok,
         f"margin {report.observability_margin:.3e}"),
        ("information matrix invertible (M3)", report.gamma_min_eig > 1e-12,
         f"min eig {report.gamma_min_eig:.3e}"),
        ("noise moment exponent (M4)", report.epsilon1 > 0,
         f"epsilon1 {report.epsilon1:.3g} (built-in samplers are Gaussian)"),
        ("Lipschitz sensing (M6)", bool(np.all(np.isfinite(report.lipschitz))),
         f"max k_n {report.lipschitz.max():.6g}"),
        ("aggregate monotonicity (M7)", report.monotonicity > 0,
         f"c1 {report.monotonicity:.3e}"),
    ]
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:38s} {detail}")
    print(f"gain floor a_min = {report.a_min:.6g}   "
          f"delta1 < {report.delta1_max:.6g}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(audit_report_to_json(report) + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_covariance(args) -> int:
    model = model_from_json(_read(args.model, "--model"))
    try:
        theta = np.array([float(v) for v in args.theta.split(",")])
    except ValueError:
        raise _ValidationExit(f"--theta must be comma-separated floats, "
                              f"got {args.theta!r}")
    if theta.shape != (model.param_dim,):
        raise _ValidationExit(f"--theta has {len(theta)} entries, model "
                              f"expects {model.param_dim}")
    if args.n_agents is not None and args.n_agents != model.n_agents:
        raise _ValidationExit(f"--n-agents {args.n_agents} does not match the "
                              f"model ({model.n_agents})")
    report = covariance_report(model, theta, args.a)
    print(f"trace_sigma_c = {report.trace_sigma_c:.6g}")
    print(f"trace_sigma_d = {report.trace_sigma_d:.6g}")
    print(f"gap_norm      = {report.gap_norm:.6g}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(covariance_report_to_json(report) + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        config = ExperimentConfig.from_json(_read(args.config, "--config"))
    except (TypeError, ValueError, KeyError) as exc:
        raise _ValidationExit(f"invalid --config file {args.config!r}: {exc}")
    if args.trials is not None:
        config.trials = args.trials
    if args.horizon is not None:
        config.horizon = args.horizon
    out_dir = _default_out_dir(args.out_dir)
    if out_dir is not None:
        config.output_dir = out_dir
    _, manifest = run_monte_carlo(config, jobs=args.jobs,
                                  progress=not args.quiet)
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def _cmd_reproduce_paper(args) -> int:
    out_dir = _default_out_dir(args.out_dir) or "./benchmark_out"
    config = reproduce_paper_experiment(trials=args.trials,
                                        horizon=args.horizon,
                                        output_dir=out_dir)
    _, manifest = run_monte_carlo(config, jobs=args.jobs,
                                  progress=not args.quiet)
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


_COMMANDS = {
    "graph-gen": _cmd_graph_gen,
    "audit": _cmd_audit,
    "covariance": _cmd_covariance,
    "simulate": _cmd_simulate,
    "reproduce-paper": _cmd_reproduce_paper,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.verb](args)
    except _ValidationExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
