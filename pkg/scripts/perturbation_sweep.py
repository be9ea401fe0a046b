"""Robustness of the estimators when the chain is mixed with uniform jumps."""
import argparse

from bmc_kdetect import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3, 0.5])
    ap.add_argument("--estimators", nargs="+", default=["alg2", "megh"])
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--out", default="perturbation_sweep.csv")
    args = ap.parse_args()

    rows = []
    for eps in args.eps:
        s = harness.Scenario(id=f"eps={eps}", ensemble="uniform", alpha="const", K=args.K,
                             n=args.n, epsilon=eps, estimators=args.estimators,
                             replications=args.replications)
        rows += harness.run_scenario(s)
    harness.emit(rows, args.out)
    print(harness.pivot_table(rows))


if __name__ == "__main__":
    main()
