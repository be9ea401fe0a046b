"""Estimators for the number of clusters.

``alg1``  singular-value thresholding on the trimmed count matrix
``alg2``  density-based peeling of the spectral embedding (full pipeline)
``megh``  maximum eigengap of the modularity matrix
``llsc``  cross-validated log-likelihood over candidate cluster counts
``llci``  as ``llsc`` with a greedy likelihood-improvement pass
``caic``  consistent AIC over candidate cluster counts
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .counts import CountMatrix, TrimmedCounts, build_counts, degrees, trim
from .exceptions import (
    DegenerateSplit,
    EigenFailure,
    EmptyEmbedding,
    NoCenters,
)
from .linalg import Embedding, SvdResult, count_singvals_above, embed, svd_truncated
from .model import Trajectory

UNASSIGNED = -1


@dataclass(frozen=True)
class Thresholds:
    """Exponents of the threshold parameterisation.

    With ``m = ell / n``: ``gamma = m^c``, ``n h^2 = m^(1+a)`` and
    ``rho = n / m^(a-b)``.
    """

    a: float = 0.9
    b: float = 0.1
    c: float = 0.75

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.b < self.a and 0 < self.c < 1):
            raise ValueError(f"need 0<a<1, 0<b<a, 0<c<1; got a={self.a} b={self.b} c={self.c}")

    def gamma(self, n: int, ell: int) -> float:
        return (ell / n) ** self.c

    def h(self, n: int, ell: int) -> float:
        return math.sqrt((ell / n) ** (1 + self.a) / n)

    def rho(self, n: int, ell: int) -> float:
        return n / (ell / n) ** (self.a - self.b)


@dataclass(eq=False)
class EstimateResult:
    k_hat: int
    centers: list[int]
    partial_clusters: list[np.ndarray]
    embedding_rank: int
    diagnostics: dict = field(default_factory=dict)
    embedding: Embedding | None = field(default=None, repr=False)


@dataclass(eq=False)
class Labeling:
    labels: np.ndarray

    @property
    def complete(self) -> bool:
        return bool(np.all(self.labels != UNASSIGNED))


# ---------------------------------------------------------------------------
# spectral count (alg1)
# ---------------------------------------------------------------------------

def alg1_spectral_count(traj: Trajectory, thresholds: Thresholds) -> tuple[int, TrimmedCounts]:
    trimmed = trim(build_counts(traj))
    gamma = thresholds.gamma(traj.n, traj.ell)
    return count_singvals_above(trimmed.dense(), gamma), trimmed


# ---------------------------------------------------------------------------
# density peeling (alg2) and nearest-centre completion
# ---------------------------------------------------------------------------

def neighborhoods(x_hat: np.ndarray, radius: float) -> np.ndarray:
    """Boolean matrix ``nbr[x, y] = ||x_hat[x] - x_hat[y]|| <= radius``."""
    return cdist(x_hat, x_hat) <= radius


def peel(nbr: np.ndarray, rho: float | None = None, n_clusters: int | None = None):
    """Greedy largest-uncovered-neighbourhood peeling.

    With ``rho``: stop as soon as the last stored set is smaller than
    ``rho`` and discard that set.  With ``n_clusters``: keep going until
    exactly that many centres exist.  Ties in the argmax go to the smallest
    state index.
    """
    if (rho is None) == (n_clusters is None):
        raise ValueError("give exactly one of rho, n_clusters")
    n = nbr.shape[0]
    w = nbr.astype(np.int32)
    uncovered = np.ones(n, dtype=bool)
    centers: list[int] = []
    sets: list[np.ndarray] = []
    last = n
    while (last >= rho) if rho is not None else (len(centers) < n_clusters):
        gains = w @ uncovered.astype(np.int32)
        z = int(np.argmax(gains))
        members = nbr[z] & uncovered
        centers.append(z)
        sets.append(np.flatnonzero(members))
        uncovered &= ~members
        last = int(members.sum())
    if rho is not None:
        centers, sets = centers[:-1], sets[:-1]
    return centers, sets


def _embedding_for(trimmed: TrimmedCounts, r: int, svd: SvdResult | None = None) -> tuple[Embedding, SvdResult]:
    if svd is None or svd.r < r:
        svd = svd_truncated(trimmed.dense(), r)
    if svd.s[r - 1] <= 0.0:
        raise EmptyEmbedding(f"only {int(np.count_nonzero(svd.s > 0))} nonzero singular values, r={r}")
    return embed(svd, r), svd


def alg2_density_count(trimmed: TrimmedCounts, r: int, thresholds: Thresholds,
                       svd: SvdResult | None = None) -> EstimateResult:
    if r < 1:
        raise ValueError("r must be >= 1")
    emb, svd = _embedding_for(trimmed, r, svd)
    n, ell = trimmed.n, trimmed.ell
    h = thresholds.h(n, ell)
    rho = thresholds.rho(n, ell)
    centers, sets = peel(neighborhoods(emb.x_hat, h), rho=rho)
    diag = {"h": h, "rho": rho, "gamma_size": int(len(trimmed.gamma_set)),
            "singular_values": svd.s[:r].tolist()}
    return EstimateResult(k_hat=len(centers), centers=centers, partial_clusters=sets,
                          embedding_rank=r, diagnostics=diag, embedding=emb)


def alg3_complete(embedding: Embedding, result: EstimateResult) -> Labeling:
    """Assign every state outside the partial clusters to its nearest centre."""
    if result.k_hat < 1:
        raise NoCenters("cannot complete a clustering without centres")
    labels = np.full(embedding.n, UNASSIGNED, dtype=np.int64)
    for k, members in enumerate(result.partial_clusters):
        labels[members] = k
    todo = np.flatnonzero(labels == UNASSIGNED)
    if len(todo):
        d = cdist(embedding.x_hat[todo], embedding.x_hat[result.centers])
        labels[todo] = np.argmin(d, axis=1)
    return Labeling(labels)


def estimate_full(traj: Trajectory, thresholds: Thresholds,
                  r_override: int | None = None) -> tuple[EstimateResult, Labeling | None]:
    """Spectral count, then peeling, then nearest-centre completion.  The labeling is ``None`` when no cluster was found."""
    k_spec, trimmed = alg1_spectral_count(traj, thresholds)
    r = r_override if r_override is not None else max(k_spec, 1)
    res = alg2_density_count(trimmed, r, thresholds)
    res.diagnostics["k_spec"] = k_spec
    labeling = alg3_complete(res.embedding, res) if res.k_hat >= 1 else None
    return res, labeling


# ---------------------------------------------------------------------------
# maximum eigengap
# ---------------------------------------------------------------------------

def modularity_matrix(counts: CountMatrix) -> np.ndarray:
    deg = degrees(counts)
    return counts.dense() - np.outer(deg.d_in, deg.d_out) / counts.ell


def eigengap_index(moduli: np.ndarray, rtol: float = 1e-10) -> int:
    """1-based ``argmax_{i>=2} (m_{i-1} - m_i)`` for moduli sorted descending;
    ties within ``rtol`` go to the smallest ``i``."""
    m = np.asarray(moduli, dtype=float)
    if len(m) < 2:
        return 1
    gaps = m[:-1] - m[1:]
    best = gaps.max()
    tol = rtol * max(abs(m[0]), np.finfo(float).tiny)
    return int(np.flatnonzero(gaps >= best - tol)[0]) + 2


def megh_estimate(counts: CountMatrix) -> int:
    if counts.ell < 1:
        raise ValueError("need at least one transition")
    try:
        ev = np.linalg.eigvals(modularity_matrix(counts))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    moduli = np.sort(np.abs(ev))[::-1]
    return eigengap_index(moduli)


# ---------------------------------------------------------------------------
# likelihood-based estimators
# ---------------------------------------------------------------------------

def candidate_labelings(counts: CountMatrix, k_max: int, thresholds: Thresholds) -> dict[int, np.ndarray]:
    """Clusterings with exactly ``k`` centres for ``k = 1..k_max``: rank-``k``
    embedding, peeling forced to ``k`` centres, nearest-centre completion."""
    trimmed = trim(counts)
    n, ell = counts.n, counts.ell
    r_max = min(k_max, n)
    svd = svd_truncated(trimmed.dense(), r_max)
    h = thresholds.h(n, ell)
    out: dict[int, np.ndarray] = {}
    for k in range(1, k_max + 1):
        emb = embed(svd, min(k, r_max))
        centers, sets = peel(neighborhoods(emb.x_hat, h), n_clusters=k)
        res = EstimateResult(k, centers, sets, emb.r)
        out[k] = alg3_complete(emb, res).labels
    return out


def fit_cluster_chain(states: np.ndarray, labels: np.ndarray, k: int,
                      smoothing: float = 0.0) -> np.ndarray:
    """Maximum-likelihood cluster transition matrix of the label sequence,
    with ``smoothing`` added to every count."""
    y = labels[states]
    C = np.zeros((k, k))
    np.add.at(C, (y[:-1], y[1:]), 1.0)
    C += smoothing
    rs = C.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(rs > 0, C / np.where(rs > 0, rs, 1.0), 1.0 / k)
    return p


def path_loglik(states: np.ndarray, labels: np.ndarray, p_hat: np.ndarray) -> float:
    """``sum_t ln(p_hat[Y_t, Y_{t+1}] / |V_{Y_{t+1}}|)`` over consecutive pairs."""
    k = p_hat.shape[0]
    sizes = np.bincount(labels, minlength=k).astype(float)
    y = labels[states]
    with np.errstate(divide="ignore"):
        terms = np.log(p_hat[y[:-1], y[1:]]) - np.log(sizes[y[1:]])
    return float(terms.sum())


def _split(traj: Trajectory):
    ell = traj.ell
    if ell < 4:
        raise DegenerateSplit("need ell >= 4 to split into train and validation")
    half = ell // 2
    train = traj.states[:half + 1]
    val = traj.states[half + 1:]
    if len(np.unique(train)) < 2 or len(val) < 2:
        raise DegenerateSplit("a half observes fewer than two states")
    return half, train, val


def _argmax_first(values: dict[int, float]) -> int:
    best = max(values.values())
    return min(k for k, v in values.items() if v == best)


def _validation_scores(traj: Trajectory, k_max: int, thresholds: Thresholds,
                       improve: bool) -> dict[int, float]:
    half, train, val = _split(traj)
    train_traj = Trajectory(train, traj.n)
    counts = build_counts(train_traj)
    smoothing = 1.0 / traj.ell
    scores = {}
    for k, labels in candidate_labelings(counts, k_max, thresholds).items():
        if improve:
            labels = improve_labels(counts, labels, k)
        p_hat = fit_cluster_chain(train, labels, k, smoothing)
        scores[k] = path_loglik(val, labels, p_hat) / half
    return scores


def llsc_estimate(traj: Trajectory, k_max: int, thresholds: Thresholds = Thresholds()) -> int:
    """Cross-validated log-likelihood: cluster on the first half, score the second."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return _argmax_first(_validation_scores(traj, k_max, thresholds, improve=False))


def llci_estimate(traj: Trajectory, k_max: int, thresholds: Thresholds = Thresholds(),
                  sweeps: int = 20) -> int:
    """:func:`llsc_estimate` with a greedy single-state likelihood hill-climb
    on the training half.  This is a stand-in for a full likelihood-based
    cluster improvement algorithm, not a reimplementation of one."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    return _argmax_first(_validation_scores(traj, k_max, thresholds, improve=True))


def caic_penalty_df(n: int, k: int) -> int:
    return n + k * (k - 1)


def caic_scores(traj: Trajectory, k_max: int, thresholds: Thresholds = Thresholds()) -> dict[int, float]:
    if traj.ell < 2:
        raise DegenerateSplit("need ell >= 2")
    counts = build_counts(traj)
    smoothing = 1.0 / traj.ell
    out = {}
    for k, labels in candidate_labelings(counts, k_max, thresholds).items():
        p_hat = fit_cluster_chain(traj.states, labels, k, smoothing)
        ll = path_loglik(traj.states, labels, p_hat)
        out[k] = -2.0 * ll + caic_penalty_df(traj.n, k) * (math.log(traj.ell) - 1.0)
    return out


def caic_estimate(traj: Trajectory, k_max: int, thresholds: Thresholds = Thresholds()) -> int:
    scores = caic_scores(traj, k_max, thresholds)
    best = min(scores.values())
    return min(k for k, v in scores.items() if v == best)


def _xlogx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def _cluster_loglik(C: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Profile log-likelihood of cluster count matrices ``C[..., i, j]``."""
    rows = C.sum(axis=-1)
    cols = C.sum(axis=-2)
    with np.errstate(divide="ignore"):
        logsz = np.where(sizes > 0, np.log(np.maximum(sizes, 1)), 0.0)
    return (_xlogx(C).sum(axis=(-1, -2)) - _xlogx(rows).sum(axis=-1)
            - (cols * logsz).sum(axis=-1))


def improve_labels(counts: CountMatrix, labels: np.ndarray, k: int, sweeps: int = 20) -> np.ndarray:
    """Greedy hill-climb: move single states between clusters while the
    training log-likelihood strictly increases; never empties a cluster."""
    labels = labels.copy()
    N = counts.matrix.tocsr()
    Nt = N.T.tocsr()
    diag = N.diagonal()
    sizes = np.bincount(labels, minlength=k).astype(float)
    coo = N.tocoo()
    C = np.zeros((k, k))
    np.add.at(C, (labels[coo.row], labels[coo.col]), coo.data.astype(float))
    ar = np.arange(k)
    for _ in range(sweeps):
        moved = 0
        for x in range(counts.n):
            a = labels[x]
            if sizes[a] <= 1:
                continue
            s = diag[x]
            lo, hi = N.indptr[x], N.indptr[x + 1]
            nb, w = N.indices[lo:hi], N.data[lo:hi].astype(float)
            keep = nb != x
            o = np.bincount(labels[nb[keep]], weights=w[keep], minlength=k)
            lo, hi = Nt.indptr[x], Nt.indptr[x + 1]
            nb, w = Nt.indices[lo:hi], Nt.data[lo:hi].astype(float)
            keep = nb != x
            i_ = np.bincount(labels[nb[keep]], weights=w[keep], minlength=k)
            if o.sum() + i_.sum() + s == 0:
                continue
            C0 = C.copy()
            C0[a, :] -= o
            C0[:, a] -= i_
            C0[a, a] -= s
            Cb = np.repeat(C0[None], k, axis=0)
            Cb[ar, ar, :] += o
            Cb[ar, :, ar] += i_
            Cb[ar, ar, ar] += s
            szb = np.repeat(sizes[None], k, axis=0)
            szb[:, a] -= 1
            szb[ar, ar] += 1
            ll = _cluster_loglik(Cb, szb)
            b = int(np.argmax(ll))
            if b != a and ll[b] > ll[a] + 1e-9 * max(1.0, abs(ll[a])):
                labels[x] = b
                C = Cb[b]
                sizes = szb[b]
                moved += 1
        if moved == 0:
            break
    return labels


# ---------------------------------------------------------------------------
# common interface
# ---------------------------------------------------------------------------

@dataclass
class EstimatorOutput:
    k_hat: int
    k_spec: int | None = None
    labels: np.ndarray | None = None


EstimatorFn = Callable[..., EstimatorOutput]


def _run_alg2(traj, thresholds, k_max=None, r_override=None):
    res, lab = estimate_full(traj, thresholds, r_override)
    return EstimatorOutput(res.k_hat, res.diagnostics["k_spec"],
                           None if lab is None else lab.labels)


def _run_alg1(traj, thresholds, k_max=None, r_override=None):
    k_spec, _ = alg1_spectral_count(traj, thresholds)
    return EstimatorOutput(k_spec, k_spec)


def _run_megh(traj, thresholds, k_max=None, r_override=None):
    return EstimatorOutput(megh_estimate(build_counts(traj)))


def _run_llsc(traj, thresholds, k_max=10, r_override=None):
    return EstimatorOutput(llsc_estimate(traj, k_max, thresholds))


def _run_llci(traj, thresholds, k_max=10, r_override=None):
    return EstimatorOutput(llci_estimate(traj, k_max, thresholds))


def _run_caic(traj, thresholds, k_max=10, r_override=None):
    return EstimatorOutput(caic_estimate(traj, k_max, thresholds))


ESTIMATORS: dict[str, EstimatorFn] = {
    "alg2": _run_alg2,
    "alg1": _run_alg1,
    "megh": _run_megh,
    "llsc": _run_llsc,
    "llci": _run_llci,
    "caic": _run_caic,
}


def register_estimator(name: str, fn: EstimatorFn) -> None:
    """Plug in an external estimator, e.g. HDBSCAN on the embedding.

    ``fn(traj, thresholds, k_max=..., r_override=...)`` must return an
    :class:`EstimatorOutput`.
    """
    ESTIMATORS[name] = fn


def run_estimator(name: str, traj: Trajectory, thresholds: Thresholds = Thresholds(),
                  k_max: int = 10, r_override: int | None = None) -> EstimatorOutput:
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; known: {sorted(ESTIMATORS)}") from None
    return fn(traj, thresholds, k_max=k_max, r_override=r_override)
