"""Accuracy of the full pipeline when the embedding rank is forced.

Uniform K=10 chains at ell = n (ln n)^2; compares r in a range around K.
"""
import argparse

from bmc_kdetect import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=10)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--ranks", type=int, nargs="+", default=[5, 8, 10, 12, 15])
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--out", default="rank_sensitivity.csv")
    args = ap.parse_args()

    rows = []
    for r in args.ranks:
        s = harness.Scenario(id=f"r{r}", ensemble="uniform", K=args.K, n=args.n,
                             r_override=r, replications=args.replications)
        rows += harness.run_scenario(s)
    harness.emit(rows, args.out)
    print(harness.pivot_table(rows))


if __name__ == "__main__":
    main()
