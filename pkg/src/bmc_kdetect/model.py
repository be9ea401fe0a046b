"""Block Markov Chain parameters, finite-n instances, trajectory simulation
and the random parameter ensembles used in the experiments.

A BMC on ``n`` states is fully described by a cluster map ``sigma`` and a
``K x K`` row-stochastic cluster transition matrix ``p``:

    P[x, y] = p[sigma(x), sigma(y)] / |V_{sigma(y)}|

so a step can be sampled in two stages (destination cluster, then a uniform
state inside it).  Everything here works on the ``K``-level reduction and
never materialises the ``n x n`` matrix ``P``.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    BadAlpha,
    ClusterTooSmall,
    DegenerateVectors,
    NoConvergence,
    NoMixing,
    NotIrreducible,
    NotStochastic,
)

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-12
ENSEMBLE_RETRIES = 1000

StartMode = Literal["stationary", "zero", "uniform"]


@dataclass(frozen=True, eq=False)
class BmcParams:
    """Cluster-level model: ``K`` clusters, transition matrix ``p``, limiting
    cluster fractions ``alpha``."""

    K: int
    p: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))

    def to_dict(self) -> dict:
        return {"K": int(self.K), "p": self.p.tolist(), "alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BmcParams":
        p = np.asarray(d["p"], dtype=float)
        K = int(d.get("K", p.shape[0]))
        return cls(K=K, p=p, alpha=np.asarray(d["alpha"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BmcParams":
        return cls.from_dict(json.loads(text))

    def permuted(self, perm) -> "BmcParams":
        """Relabel clusters: new cluster ``i`` is old cluster ``perm[i]``."""
        perm = np.asarray(perm)
        return BmcParams(self.K, self.p[np.ix_(perm, perm)], self.alpha[perm])


@dataclass(frozen=True, eq=False)
class BmcInstance:
    """A finite-``n`` realisation of a :class:`BmcParams`.

    States are laid out contiguously: the first ``sizes[0]`` indices belong
    to cluster 0, the next ``sizes[1]`` to cluster 1, and so on.
    """

    params: BmcParams
    n: int
    sigma: np.ndarray
    sizes: np.ndarray
    pi: np.ndarray
    offsets: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def Pi(self) -> np.ndarray:
        """State-level stationary vector ``pi[sigma(x)] / |V_sigma(x)|``."""
        return (self.pi / self.sizes)[self.sigma]

    def transition_matrix(self) -> np.ndarray:
        """Dense ``n x n`` matrix ``P``; only meant for small ``n``."""
        s = self.sigma
        return self.params.p[np.ix_(s, s)] / self.sizes[s][None, :]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Observed path ``X_0 .. X_ell`` over states ``0 .. n-1``."""

    states: np.ndarray
    n: int
    seed: int | None = None

    def __post_init__(self):
        s = np.ascontiguousarray(self.states, dtype=np.int64)
        object.__setattr__(self, "states", s)
        if s.ndim != 1 or len(s) < 1:
            raise ValueError("trajectory needs at least one state")
        if len(s) and (s.min() < 0 or s.max() >= self.n):
            raise ValueError(f"state index outside [0, {self.n})")

    @property
    def ell(self) -> int:
        return len(self.states) - 1

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


# ---------------------------------------------------------------------------
# validation and basic chain quantities
# ---------------------------------------------------------------------------

def is_irreducible(p: np.ndarray) -> bool:
    p = np.asarray(p)
    ncomp, _ = connected_components(p > 0, directed=True, connection="strong")
    return ncomp == 1


def validate_params(params: BmcParams) -> None:
    """Raise if ``params`` violates stochasticity, positivity of ``alpha`` or
    irreducibility of ``p``; return ``None`` otherwise."""
    p, alpha, K = params.p, params.alpha, params.K
    if p.shape != (K, K):
        raise NotStochastic(f"p has shape {p.shape}, expected ({K}, {K})")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise NotStochastic("p has negative or non-finite entries")
    if np.max(np.abs(p.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise NotStochastic("rows of p do not sum to 1")
    if alpha.shape != (K,):
        raise BadAlpha(f"alpha has shape {alpha.shape}, expected ({K},)")
    if not np.all(np.isfinite(alpha)) or alpha.min() <= 0:
        raise BadAlpha("alpha must be strictly positive")
    if abs(alpha.sum() - 1.0) > STOCHASTIC_TOL:
        raise BadAlpha("alpha does not sum to 1")
    if not is_irreducible(p):
        raise NotIrreducible("cluster chain p is not irreducible")


def stationary_distribution(p: np.ndarray, max_iter: int = 100_000,
                            tol: float = STATIONARY_TOL) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by power
    iteration.  Raises :class:`NoConvergence` for (near-)periodic chains."""
    p = np.asarray(p, dtype=float)
    K = p.shape[0]
    v = np.full(K, 1.0 / K)
    for _ in range(max_iter):
        w = v @ p
        w /= w.sum()
        if np.abs(w - v).sum() <= tol:
            return w
        v = w
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def _stationary_robust(p: np.ndarray) -> np.ndarray:
    try:
        return stationary_distribution(p, max_iter=20_000)
    except NoConvergence:
        K = p.shape[0]
        A = np.vstack([p.T - np.eye(K), np.ones(K)])
        b = np.zeros(K + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()


def cluster_sizes(alpha: np.ndarray, n: int) -> np.ndarray:
    """``|V_k| = floor(n alpha_k)`` for ``k >= 2``; cluster 1 takes the rest."""
    alpha = np.asarray(alpha, dtype=float)
    sizes = np.floor(n * alpha).astype(np.int64)
    sizes[0] = n - sizes[1:].sum()
    return sizes


def build_instance(params: BmcParams, n: int) -> BmcInstance:
    validate_params(params)
    sizes = cluster_sizes(params.alpha, n)
    if sizes.min() < 1:
        raise ClusterTooSmall(f"n={n} leaves an empty cluster (sizes {sizes.tolist()})")
    sigma = np.repeat(np.arange(params.K), sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    pi = _stationary_robust(params.p)
    return BmcInstance(params=params, n=int(n), sigma=sigma, sizes=sizes,
                       pi=pi, offsets=offsets)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _sample_path(inst: BmcInstance, kernel: np.ndarray, ell: int, seed: int,
                 start: StartMode) -> Trajectory:
    # Draw order is fixed: start draws, then ell cluster uniforms, then ell
    # within-cluster uniforms.  Changing it changes every stored trajectory.
    if ell < 1:
        raise ValueError("ell must be >= 1")
    rng = np.random.default_rng(seed)
    u0, w0 = rng.random(2)
    if start == "stationary":
        cum0 = np.cumsum(inst.pi)
        y0 = min(int(np.searchsorted(cum0, u0 * cum0[-1], side="right")), inst.K - 1)
        x0 = int(inst.offsets[y0] + int(w0 * inst.sizes[y0]))
    elif start == "uniform":
        x0 = min(int(u0 * inst.n), inst.n - 1)
        y0 = int(inst.sigma[x0])
    elif start == "zero":
        x0, y0 = 0, int(inst.sigma[0])
    else:
        raise ValueError(f"unknown start mode {start!r}")

    u = rng.random(ell)
    w = rng.random(ell)

    cum = np.cumsum(kernel, axis=1)
    cum[:, -1] = 1.0
    rows = [list(r) for r in cum]
    ys = np.empty(ell, dtype=np.int64)
    y = y0
    bis = bisect.bisect_right
    for t, ut in enumerate(u.tolist()):
        y = bis(rows[y], ut)
        ys[t] = y

    states = np.empty(ell + 1, dtype=np.int64)
    states[0] = x0
    within = (w * inst.sizes[ys]).astype(np.int64)
    np.minimum(within, inst.sizes[ys] - 1, out=within)
    states[1:] = inst.offsets[ys] + within
    return Trajectory(states=states, n=inst.n, seed=seed)


def simulate(instance: BmcInstance, ell: int, seed: int,
             start: StartMode = "stationary") -> Trajectory:
    """Sample ``X_0 .. X_ell``; ``X_0`` is drawn from the stationary law by default."""
    return _sample_path(instance, instance.params.p, ell, seed, start)


@dataclass(frozen=True, eq=False)
class PerturbedSampler:
    """Sampler for ``(1 - eps) P_BMC + eps P_uniform``.

    A uniform jump lands in cluster ``k`` with probability ``|V_k| / n`` and
    is then uniform inside it, so the mixture is again a two-stage kernel
    with cluster rows ``(1 - eps) p + eps |V| / n``.  The random stream is
    consumed exactly as in :func:`simulate`, hence ``eps = 0`` reproduces it.
    """

    instance: BmcInstance
    spec: PerturbationSpec

    @property
    def kernel(self) -> np.ndarray:
        eps = self.spec.epsilon
        inst = self.instance
        if eps == 0.0:
            return inst.params.p
        return (1.0 - eps) * inst.params.p + eps * (inst.sizes / inst.n)[None, :]

    def simulate(self, ell: int, seed: int, start: StartMode = "stationary") -> Trajectory:
        return _sample_path(self.instance, self.kernel, ell, seed, start)

    def transition_matrix(self) -> np.ndarray:
        inst = self.instance
        eps = self.spec.epsilon
        return (1.0 - eps) * inst.transition_matrix() + eps / inst.n


def perturb(instance: BmcInstance, spec: PerturbationSpec) -> PerturbedSampler:
    return PerturbedSampler(instance, spec)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def uniform_simplex(rng: np.random.Generator, K: int, size=None) -> np.ndarray:
    """Uniform draw(s) on the probability simplex via normalised Exp(1) variates."""
    shape = (K,) if size is None else (*np.atleast_1d(size), K)
    e = rng.exponential(1.0, size=shape)
    return e / e.sum(axis=-1, keepdims=True)


def _alpha_ok(alpha: np.ndarray, n: int | None) -> bool:
    return n is None or np.floor(n * alpha).min() >= 1


def _draw_alpha(rng, K, n, mode, pi=None) -> np.ndarray:
    if mode == "const":
        alpha = np.full(K, 1.0 / K)
    elif mode == "pi":
        alpha = np.asarray(pi, dtype=float)
    elif mode == "uniform":
        for _ in range(ENSEMBLE_RETRIES):
            alpha = uniform_simplex(rng, K)
            if _alpha_ok(alpha, n):
                return alpha
        raise ClusterTooSmall(f"no admissible alpha for K={K}, n={n} in {ENSEMBLE_RETRIES} draws")
    else:
        raise ValueError(f"unknown alpha mode {mode!r}")
    if not _alpha_ok(alpha, n):
        raise ClusterTooSmall(f"alpha leaves an empty cluster at n={n}")
    return alpha


def sample_uniform_ensemble(K: int, rng: np.random.Generator, n: int | None = None,
                            alpha: str = "uniform") -> BmcParams:
    """Rows of ``p`` uniform on the simplex; ``alpha`` uniform ("uniform")
    or ``1/K`` ("const").  Uniform ``alpha`` is redrawn until every cluster
    gets at least one state at size ``n``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    p = uniform_simplex(rng, K, size=K)
    return BmcParams(K, p, _draw_alpha(rng, K, n, alpha))


def dot_product_matrix(v: np.ndarray) -> np.ndarray:
    """``p[i, j] = <v_i, v_j> / sum_j <v_i, v_j>`` for non-negative rows ``v``."""
    v = np.asarray(v, dtype=float)
    G = v @ v.T
    rs = G.sum(axis=1, keepdims=True)
    if np.linalg.matrix_rank(G) < 1 or np.any(rs <= 0):
        raise DegenerateVectors("Gram matrix has a zero row")
    return G / rs


def sample_lowrank_ensemble(K: int, d: int, rng: np.random.Generator, n: int | None = None,
                            alpha: str = "uniform") -> BmcParams:
    """Dot-product model with ``v_i ~ Dir(1/d, ..., 1/d)``; ``rank(p) <= d``.

    Reducible draws (possible when the Dirichlet vectors have disjoint
    supports) are rejected.
    """
    if not 1 <= d < K:
        raise ValueError("need 1 <= d < K")
    for _ in range(ENSEMBLE_RETRIES):
        v = rng.dirichlet(np.full(d, 1.0 / d), size=K)
        try:
            p = dot_product_matrix(v)
        except DegenerateVectors:
            continue
        if is_irreducible(p):
            return BmcParams(K, p, _draw_alpha(rng, K, n, alpha))
    raise DegenerateVectors(f"no irreducible low-rank draw in {ENSEMBLE_RETRIES} attempts")


def reversible_weights(rng: np.random.Generator, K: int) -> np.ndarray:
    W = uniform_simplex(rng, K, size=K)
    W = (W + W.T) / 2.0
    return W / W.sum()


def sample_reversible_ensemble(K: int, rng: np.random.Generator, n: int | None = None) -> BmcParams:
    """Random walk on a symmetrised uniform weight matrix with ``alpha = pi``,
    so every state has the same stationary mass ``1/n`` asymptotically."""
    for _ in range(ENSEMBLE_RETRIES):
        W = reversible_weights(rng, K)
        p = W / W.sum(axis=1, keepdims=True)
        pi = W.sum(axis=0)
        pi = pi / pi.sum()
        if _alpha_ok(pi, n):
            return BmcParams(K, p, pi)
    raise ClusterTooSmall(f"no admissible reversible draw for K={K}, n={n}")


def sample_assortative_ensemble(K: int, p0: float, rng: np.random.Generator,
                                n: int | None = None, alpha: str = "const") -> BmcParams:
    """Diagonal fixed at ``p0``; each off-diagonal row is ``(1 - p0) q`` with
    ``q`` uniform on the ``(K-1)``-simplex."""
    if K < 2:
        raise ValueError("assortative ensemble needs K >= 2")
    if not 0.5 < p0 < 1.0:
        raise ValueError("p0 must lie in (1/2, 1)")
    p = np.empty((K, K))
    for i in range(K):
        q = uniform_simplex(rng, K - 1)
        p[i, :i] = (1 - p0) * q[:i]
        p[i, i + 1:] = (1 - p0) * q[i:]
        p[i, i] = p0
    return BmcParams(K, p, _draw_alpha(rng, K, n, alpha))


def dot_product_example(a: float = 1.0, b: float = 1.0) -> BmcParams:
    """Three clusters, rank-two ``p``: ``v = (a(1,0), b(1,1), a(0,1))``,
    equal cluster fractions."""
    v = np.array([[a, 0.0], [b, b], [0.0, a]])
    return BmcParams(3, dot_product_matrix(v), np.full(3, 1.0 / 3))


def two_cluster_symmetric(p0: float) -> BmcParams:
    return BmcParams(2, np.array([[p0, 1 - p0], [1 - p0, p0]]), np.array([0.5, 0.5]))


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------

def _xlogratio(num: np.ndarray, den: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """``weight * ln(num / den)`` with 0 ln(0/q) = 0 and q ln(q/0) = +inf."""
    out = np.zeros(np.broadcast(num, den, weight).shape)
    num, den, weight = np.broadcast_arrays(num, den, weight)
    live = weight > 0
    inf = live & (den <= 0)
    ok = live & ~inf
    out[ok] = weight[ok] * np.log(num[ok] / den[ok])
    out[inf] = np.inf
    return out


def pairwise_information(params: BmcParams) -> np.ndarray:
    """Matrix of the divergence-style candidates over ordered pairs ``(i, j)``;
    the diagonal is 0 and ``+inf`` marks pairs separated by a forbidden
    transition."""
    p, alpha, K = params.p, params.alpha, params.K
    pi = _stationary_robust(p)
    out = np.zeros((K, K))
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            t1 = _xlogratio(p[i], p[j], pi[i] * p[i])
            t2 = _xlogratio(p[:, i] * alpha[j], p[:, j] * alpha[i], pi * p[:, i])
            s = (t1 + t2).sum()
            out[i, j] = s / alpha[i] + (pi[j] / alpha[j] - pi[i] / alpha[i])
    return out


def information_quantity(params: BmcParams) -> float:
    """Minimum over ordered pairs ``i != j`` of the cluster-separation
    quantity; 0 means two clusters are asymptotically indistinguishable."""
    if params.K < 2:
        return math.inf
    M = pairwise_information(params)
    mask = ~np.eye(params.K, dtype=bool)
    val = float(M[mask].min())
    # rounding can push an exact zero slightly negative
    return 0.0 if -1e-12 < val < 0.0 else val


def mixing_time(params: BmcParams, max_t: int = 100_000) -> int:
    """First ``t >= 1`` at which the worst-case total-variation distance to
    stationarity is at most 1/4, evaluated on the cluster chain."""
    p = params.p
    pi = _stationary_robust(p)
    pt = p.copy()
    for t in range(1, max_t + 1):
        d = 0.5 * np.abs(pt - pi[None, :]).sum(axis=1).max()
        if d <= 0.25:
            return t
        pt = pt @ p
    raise NoMixing(f"distance to stationarity still above 1/4 after {max_t} steps")
