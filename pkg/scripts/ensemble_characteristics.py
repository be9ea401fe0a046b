"""Average I(alpha, p), normalized cluster entropy and mixing time of the
random parameter ensembles."""
import argparse
import math

import numpy as np

from bmc_kdetect import model
from bmc_kdetect.metrics import Partition, normalized_entropy

ENSEMBLES = {
    "uniform/uniform": lambda K, r, n: model.sample_uniform_ensemble(K, r, n=n),
    "uniform/const": lambda K, r, n: model.sample_uniform_ensemble(K, r, n=n, alpha="const"),
    "lowrank/uniform": lambda K, r, n: model.sample_lowrank_ensemble(K, math.ceil(K / 2), r, n=n),
    "reversible/pi": lambda K, r, n: model.sample_reversible_ensemble(K, r, n=n),
    "assortative/const": lambda K, r, n: model.sample_assortative_ensemble(K, 0.8, r, n=n),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[5, 10])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--draws", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("ensemble,K,I_mean,I_margin,Hbar_mean,Hbar_margin,tmix_mean,tmix_margin")
    for name, draw in ENSEMBLES.items():
        for K in args.K:
            rng = np.random.default_rng(args.seed)
            vals = []
            for _ in range(args.draws):
                params = draw(K, rng, args.n)
                inst = model.build_instance(params, args.n)
                vals.append((model.information_quantity(params),
                             normalized_entropy(Partition(inst.sigma, K)),
                             model.mixing_time(params)))
            a = np.asarray(vals, dtype=float)
            mean = a.mean(axis=0)
            margin = 1.96 * a.std(axis=0, ddof=1) / math.sqrt(len(a))
            cells = ",".join(f"{m:.4g},{e:.2g}" for m, e in zip(mean, margin))
            print(f"{name},{K},{cells}")


if __name__ == "__main__":
    main()
