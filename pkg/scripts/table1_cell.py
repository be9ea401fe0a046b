"""Run one cell of the estimator comparison grid (Tests 1-4).

    python3 scripts/table1_cell.py --test 1 --K 3 --ell nlog2 --estimators alg2 megh llsc caic
"""
import argparse
import sys

from bmc_kdetect import harness


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--test", type=int, choices=[1, 2, 3, 4], required=True)
    ap.add_argument("--K", type=int, required=True)
    ap.add_argument("--ell", choices=["nlog2", "n2"], default="nlog2")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--estimators", nargs="+", default=["alg2"])
    ap.add_argument("--replications", type=int, default=20)
    ap.add_argument("--sequential", action="store_true",
                    help="sample until the 95%% margin is <= 0.15 (at least 250 runs)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="table1_cell.csv")
    args = ap.parse_args(argv)

    s = harness.table1_scenario(args.test, args.K, ell=args.ell, n=args.n,
                                estimators=args.estimators, replications=args.replications,
                                sequential=args.sequential, root_seed=args.seed)
    rows = harness.run_scenario(s)
    harness.emit(rows, args.out)
    for (scen, e), c in harness.aggregate(rows).items():
        print(f"{scen:24s} {e:6s} mean={c.mean:6.2f} sd={c.sd:5.2f} n={c.count} errors={c.errors}")


if __name__ == "__main__":
    sys.exit(main())
