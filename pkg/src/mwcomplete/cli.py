"""Command-line entry point.

Subcommands::

    phase   --plan plan.json [--out dir] [--workers k]
    fdd     --config chan.json --plan plan.json [--out dir] [--workers k] [--r r]
    weights --theta-u ... --theta-v ... [--mode multi|single] [--r-prime k] [--out dir]
    bounds  --plan plan.json [--out dir]

Angles on the command line and in plans are in degrees.  Exit status is 0
on success, 2 for an invalid config or argument, 3 for an I/O error.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .errors import ConfigError
from .experiments import ExperimentPlan, emit, generate_instance, derive_seed, run_fdd_pipeline, run_phase_transition
from .fdd import ChannelConfig
from .subspaces import canonical_pair
from .weights import optimize_weights, weight_report_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

BOUND_COLUMNS = ("mode", "alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "alpha6", "p_lower", "feasible")


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from exc


def _load_plan(path):
    try:
        return ExperimentPlan.load(path)
    except OSError as exc:
        raise OSError(f"cannot read plan {path}: {exc.strerror}") from exc


def _print_summary(result, out):
    rows = result.aggregate()
    out.write(f"{'method':<9} {'p':>5} {'rate':>6} {'median_nre':>11}\n")
    for row in rows:
        out.write(f"{row['method']:<9} {row['p']:>5.2f} {row['success_rate']:>6.2f} {row['median_nre']:>11.2e}\n")


def _bound_table(theta_u, theta_v, r_prime, n):
    rows = []
    for mode in ("none", "single", "multi"):
        spec, rep = optimize_weights(theta_u, theta_v, r_prime=r_prime, n=n, mode=mode)
        row = {"mode": mode, **rep.to_dict()}
        rows.append((row, spec))
    return rows


def _bounds_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUND_COLUMNS)
    for row, _ in rows:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in BOUND_COLUMNS])
    return buf.getvalue()


def cmd_phase(args, out):
    plan = _load_plan(args.plan)
    result = run_phase_transition(plan, workers=args.workers)
    paths = emit(result, args.out)
    _print_summary(result, out)
    out.write(f"wrote {', '.join(paths)} ({result.seconds:.1f} s)\n")
    return EXIT_OK


def cmd_fdd(args, out):
    try:
        cfg = ChannelConfig.load(args.config)
    except OSError as exc:
        raise OSError(f"cannot read channel config {args.config}: {exc.strerror}") from exc
    plan = _load_plan(args.plan) if args.plan else None
    result, chain = run_fdd_pipeline(cfg, plan, workers=args.workers, r=args.r)
    paths = emit(result, args.out, stem=args.stem, extra={"chain": chain})
    out.write("theta_u (deg): " + " ".join(f"{t:.2f}" for t in chain["theta_u_deg"]) + "\n")
    out.write("theta_v (deg): " + " ".join(f"{t:.2f}" for t in chain["theta_v_deg"]) + "\n")
    _print_summary(result, out)
    out.write(f"wrote {', '.join(paths)}\n")
    return EXIT_OK


def cmd_weights(args, out):
    tu = np.radians(args.theta_u)
    tv = np.radians(args.theta_v)
    if tu.size != tv.size:
        raise ConfigError("--theta-u and --theta-v need the same number of angles")
    if np.any(tu < 0) or np.any(tu > np.pi / 2) or np.any(tv < 0) or np.any(tv > np.pi / 2):
        raise ConfigError("angles must lie in [0, 90] degrees")
    spec, rep = optimize_weights(tu, tv, r_prime=args.r_prime, n=args.n, mode=args.mode)
    text = weight_report_json(tu, tv, spec, rep, mode=args.mode)
    out.write(text + "\n")
    if args.out:
        _ensure_dir(args.out)
        _write(os.path.join(args.out, f"weights_{args.mode}.json"), text)
        rows = [({"mode": args.mode, **rep.to_dict()}, spec)]
        _write(os.path.join(args.out, f"weights_{args.mode}.csv"), _bounds_csv(rows))
    return EXIT_OK


def cmd_bounds(args, out):
    plan = _load_plan(args.plan)
    if plan.prescribed:
        tu, tv = np.radians(plan.theta_u_deg), np.radians(plan.theta_v_deg)
    else:
        # perturbation priors: report the angles of the first trial
        _, model = generate_instance(plan, derive_seed(plan.seed, 1, 0))
        tu = canonical_pair(model.u_true, model.u_prior)[2]
        tv = canonical_pair(model.v_true, model.v_prior)[2]
    rows = _bound_table(tu, tv, plan.r_prime, plan.n)
    out.write(f"{'mode':<7}" + "".join(f"{c:>10}" for c in BOUND_COLUMNS[1:]) + "\n")
    for row, _ in rows:
        cells = "".join(f"{row[c]:>10.4g}" for c in BOUND_COLUMNS[1:-1])
        out.write(f"{row['mode']:<7}{cells}{str(row['feasible']):>10}\n")
    if args.out:
        _ensure_dir(args.out)
        stem = f"{plan.output or plan.preset or 'plan'}_bounds"
        doc = {
            "theta_u_deg": np.degrees(tu).tolist(),
            "theta_v_deg": np.degrees(tv).tolist(),
            "rows": [{**row, "weights": spec.to_dict()} for row, spec in rows],
        }
        _write(os.path.join(args.out, stem + ".csv"), _bounds_csv(rows))
        _write(os.path.join(args.out, stem + ".json"), json.dumps(doc, indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mwcomplete", description="Weighted matrix completion experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="run a phase-transition sweep")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("fdd", help="velocity -> angles -> weights -> success rates")
    p.add_argument("--config", required=True)
    p.add_argument("--plan")
    p.add_argument("--out", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--r", type=int, default=None, help="number of angles kept (default: number of users)")
    p.add_argument("--stem", default="fdd")
    p.set_defaults(func=cmd_fdd)

    p = sub.add_parser("weights", help="optimise weights for given angles")
    p.add_argument("--theta-u", type=float, nargs="+", required=True)
    p.add_argument("--theta-v", type=float, nargs="+", required=True)
    p.add_argument("--mode", choices=("multi", "single"), default="multi")
    p.add_argument("--r-prime", type=int, default=None)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("bounds", help="alpha / bound table for a plan's angles")
    p.add_argument("--plan", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "workers", 1) < 1:
        sys.stderr.write("error: --workers must be at least 1\n")
        return EXIT_CONFIG
    try:
        return args.func(args, out)
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
