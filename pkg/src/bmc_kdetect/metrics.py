"""Clustering comparison metrics."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .exceptions import NormalizeUndefined

BRUTE_FORCE_MAX_PARTS = 8


@dataclass(frozen=True, eq=False)
class Partition:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1 if labels.size else 0)

    @property
    def n(self) -> int:
        return len(self.labels)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _as_partition(x) -> Partition:
    return x if isinstance(x, Partition) else Partition.from_labels(x)


def relative_accuracy(k_hat: int, k_true: int) -> float:
    if k_true < 1:
        raise ValueError("k_true must be >= 1")
    return (k_hat - k_true) / k_true


def _entropy_from_sizes(sizes: np.ndarray, n: int) -> float:
    q = sizes[sizes > 0] / n
    return float(-(q * np.log(q)).sum())


def entropy(part) -> float:
    part = _as_partition(part)
    if part.n < 1:
        raise ValueError("empty partition")
    return _entropy_from_sizes(part.sizes(), part.n)


def normalized_entropy(part) -> float:
    part = _as_partition(part)
    if part.k < 2:
        raise NormalizeUndefined("normalized entropy needs k >= 2")
    return entropy(part) / math.log(part.k)


def contingency(a, b) -> np.ndarray:
    a, b = _as_partition(a), _as_partition(b)
    if a.n != b.n:
        raise ValueError("partitions have different sizes")
    table = np.zeros((a.k, b.k), dtype=np.int64)
    np.add.at(table, (a.labels, b.labels), 1)
    return table


def mutual_information(a, b) -> float:
    table = contingency(a, b)
    n = table.sum()
    ra, cb = table.sum(axis=1), table.sum(axis=0)
    i, j = np.nonzero(table)
    nij = table[i, j].astype(float)
    return float((nij / n * np.log(n * nij / (ra[i] * cb[j]))).sum())


def expected_mutual_information(sizes_a, sizes_b) -> float:
    """Expected MI of two independent uniformly random partitions with the
    given part sizes (hypergeometric model for each contingency cell)."""
    a = np.asarray([s for s in sizes_a if s > 0], dtype=np.int64)
    b = np.asarray([s for s in sizes_b if s > 0], dtype=np.int64)
    n = int(a.sum())
    if n != int(b.sum()):
        raise ValueError("size vectors must sum to the same n")
    lg = gammaln(np.arange(n + 2, dtype=float))  # lg[m] = ln((m-1)!)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / n * (np.log(n * nij) - math.log(ai * bj))
            logp = (lg[ai + 1] + lg[bj + 1] + lg[n - ai + 1] + lg[n - bj + 1]
                    - lg[n + 1] - lg[nij + 1] - lg[ai - nij + 1] - lg[bj - nij + 1]
                    - lg[n - ai - bj + nij + 1])
            emi += float((term * np.exp(logp)).sum())
    return emi


@dataclass(frozen=True)
class AmiResult:
    value: float
    degenerate: bool = False


def ami_detail(a, b) -> AmiResult:
    a, b = _as_partition(a), _as_partition(b)
    ha, hb = entropy(a), entropy(b)
    if ha * hb == 0.0:
        return AmiResult(0.0, degenerate=True)
    mi = mutual_information(a, b)
    emi = expected_mutual_information(a.sizes(), b.sizes())
    norm = math.sqrt(ha * hb)
    denom = norm - emi
    if abs(denom) <= 1e-12 * norm:
        # expectation already equals the maximum: both partitions are all
        # singletons, hence identical up to relabelling
        return AmiResult(1.0, degenerate=True)
    return AmiResult((mi - emi) / denom)


def ami(a, b) -> float:
    """Adjusted mutual information, geometric-mean normalisation.  Returns 0
    when either partition has zero entropy."""
    return ami_detail(a, b).value


def misclassification(truth, est) -> tuple[int, dict[int, int]]:
    """Number of misclassified states under the best matching of estimated
    to true clusters, and that matching ``{true_k: est_label}``.

    The side with fewer clusters is padded with empty clusters.
    """
    truth, est = _as_partition(truth), _as_partition(est)
    m = max(truth.k, est.k)
    overlap = np.zeros((m, m), dtype=np.int64)
    overlap[:truth.k, :est.k] = contingency(truth, est)
    if m <= BRUTE_FORCE_MAX_PARTS:
        best, best_perm = -1, None
        rows = np.arange(m)
        for perm in itertools.permutations(range(m)):
            s = int(overlap[rows, perm].sum())
            if s > best:
                best, best_perm = s, perm
        cols = np.asarray(best_perm)
    else:
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        best = int(overlap[rows, cols].sum())
    return truth.n - best, {int(k): int(cols[k]) for k in range(m)}


def misclassification_matching(truth, est) -> int:
    """Same objective solved by bipartite matching only (cross-check)."""
    truth, est = _as_partition(truth), _as_partition(est)
    m = max(truth.k, est.k)
    overlap = np.zeros((m, m), dtype=np.int64)
    overlap[:truth.k, :est.k] = contingency(truth, est)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return truth.n - int(overlap[rows, cols].sum())


@dataclass
class ComparisonReport:
    relative_accuracy: float
    ami: float
    mi: float
    entropy_a: float
    entropy_b: float
    misclassified_count: int
    optimal_permutation: dict[int, int]
    ami_degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimal_permutation"] = {str(k): v for k, v in self.optimal_permutation.items()}
        return d


def compare(truth, est) -> ComparisonReport:
    truth, est = _as_partition(truth), _as_partition(est)
    k_true = int(np.count_nonzero(truth.sizes()))
    k_hat = int(np.count_nonzero(est.sizes()))
    a = ami_detail(truth, est)
    count, perm = misclassification(truth, est)
    return ComparisonReport(
        relative_accuracy=relative_accuracy(k_hat, k_true),
        ami=a.value,
        mi=mutual_information(truth, est),
        entropy_a=entropy(truth),
        entropy_b=entropy(est),
        misclassified_count=count,
        optimal_permutation=perm,
        ami_degenerate=a.degenerate,
    )
