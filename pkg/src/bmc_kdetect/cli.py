"""Command line entry point ``bmc-kdetect``.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .estimators import ESTIMATORS, Thresholds, run_estimator
from .exceptions import NumericalError
from .io import read_labels, read_trajectory, write_labels, write_params, write_trajectory
from .metrics import compare

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _cmd_sample(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    seed = cfg.pop("seed", None)
    s = harness.Scenario.from_dict(cfg)
    if seed is None:
        seed = harness.child_seed(s.root_seed, 0)
    inst, traj = harness.make_trajectory(s, int(seed))
    write_trajectory(traj, args.out, fmt=args.format)
    if args.labels_out:
        write_labels(inst.sigma, args.labels_out)
    if args.params_out:
        write_params(inst.params, args.params_out)
    print(json.dumps({"n": traj.n, "ell": traj.ell, "K": inst.K, "seed": int(seed)}))
    return EXIT_OK


def _cmd_estimate(args) -> int:
    traj = read_trajectory(args.traj, n=args.n)
    thr = Thresholds(args.a, args.b, args.c)
    out = run_estimator(args.estimator, traj, thr, k_max=args.k_max, r_override=args.r)
    if args.labels_out and out.labels is not None:
        write_labels(out.labels, args.labels_out)
    print(json.dumps({"estimator": args.estimator, "n": traj.n, "ell": traj.ell,
                      "k_hat": out.k_hat, "k_spec": out.k_spec}))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    scenarios = harness.load_scenarios(args.config)
    rows = []
    for s in scenarios:
        if args.sequential:
            s.sequential = True
        rows.extend(harness.run_scenario(s))
    harness.emit(rows, args.out, fmt=args.format, include_timing=args.timing)
    if args.pivot:
        Path(args.pivot).write_text(harness.pivot_table(rows))
    n_err = sum(1 for r in rows if r.error)
    if n_err:
        logging.getLogger(__name__).warning("%d error rows recorded", n_err)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    truth, est = read_labels(args.truth), read_labels(args.est)
    print(json.dumps(compare(truth, est).to_dict(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmc-kdetect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="simulate a trajectory from a scenario config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=["binary", "text"], default=None)
    s.add_argument("--labels-out")
    s.add_argument("--params-out")
    s.set_defaults(func=_cmd_sample)

    e = sub.add_parser("estimate", help="estimate K from a trajectory file")
    e.add_argument("--traj", required=True)
    e.add_argument("--estimator", default="alg2", choices=sorted(ESTIMATORS))
    e.add_argument("--a", type=float, default=0.9)
    e.add_argument("--b", type=float, default=0.1)
    e.add_argument("--c", type=float, default=0.75)
    e.add_argument("--r", type=int, default=None, help="override the embedding rank")
    e.add_argument("--k-max", type=int, default=10)
    e.add_argument("--n", type=int, default=None, help="state count for text trajectories")
    e.add_argument("--labels-out")
    e.set_defaults(func=_cmd_estimate)

    x = sub.add_parser("experiment", help="run scenario replications and write results")
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--sequential", action="store_true")
    x.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    x.add_argument("--pivot", help="also write a scenario x estimator summary CSV")
    x.add_argument("--timing", action="store_true", help="include wall_time_ms (breaks byte identity)")
    x.set_defaults(func=_cmd_experiment)

    m = sub.add_parser("metrics", help="compare two label files")
    m.add_argument("--truth", required=True)
    m.add_argument("--est", required=True)
    m.set_defaults(func=_cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
