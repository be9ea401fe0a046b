"""Dense linear algebra: truncated SVD, singular-value counting through the
inertia of a shifted Gram matrix, and the spectral embedding.

Counting singular values above ``gamma`` does not need the SVD.  The number
of positive eigenvalues of ``A^T A - gamma^2 I`` equals the number of
singular values of ``A`` above ``gamma``, and by Sylvester's law of inertia
it can be read off the block-diagonal factor ``D`` of a symmetric indefinite
factorization ``P (A^T A - gamma^2 I) P^T = L D L^T``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import FactorizationBreakdown, NoConvergence

log = logging.getLogger(__name__)

DENSE_SVD_MAX_N = 4096
INERTIA_MAX_N = 4096
TIE_RTOL = 1e-12
# Bunch-Kaufman growth constant
_BK_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


def _as_dense(a) -> np.ndarray:
    if sp.issparse(a):
        return a.toarray().astype(float)
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# symmetric indefinite factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LdlFactors:
    """``A[perm][:, perm] = L @ D @ L.T`` with ``D`` made of 1x1/2x2 blocks.

    ``blocks`` lists ``(start, size)`` for each diagonal block of ``D``.
    """

    L: np.ndarray
    D: np.ndarray
    perm: np.ndarray
    blocks: list[tuple[int, int]]


def ldl_bunch_kaufman(a: np.ndarray) -> LdlFactors:
    """Bunch-Kaufman partial pivoting ``L D L^T`` of a symmetric matrix."""
    A = np.array(a, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    L = np.eye(n)
    D = np.zeros((n, n))
    perm = np.arange(n)
    blocks: list[tuple[int, int]] = []

    def swap(i, j):
        if i == j:
            return
        A[[i, j], :] = A[[j, i], :]
        A[:, [i, j]] = A[:, [j, i]]
        L[[i, j], :k] = L[[j, i], :k]
        perm[[i, j]] = perm[[j, i]]

    k = 0
    while k < n:
        akk = abs(A[k, k])
        if k + 1 < n:
            col = np.abs(A[k + 1:, k])
            r = int(np.argmax(col)) + k + 1
            colmax = col[r - k - 1]
        else:
            r, colmax = k, 0.0

        if not (np.isfinite(akk) and np.isfinite(colmax)):
            raise FactorizationBreakdown(f"non-finite pivot candidate at step {k}")

        if max(akk, colmax) == 0.0:
            # zero column: a zero 1x1 block, nothing to eliminate
            blocks.append((k, 1))
            k += 1
            continue

        step = 1
        if akk < _BK_ALPHA * colmax:
            row = np.abs(A[r, k:])
            row[r - k] = 0.0
            rowmax = row.max()
            if akk * rowmax >= _BK_ALPHA * colmax * colmax:
                pass
            elif abs(A[r, r]) >= _BK_ALPHA * rowmax:
                swap(k, r)
            else:
                swap(k + 1, r)
                step = 2

        if step == 1:
            d = A[k, k]
            D[k, k] = d
            l = A[k + 1:, k] / d
            L[k + 1:, k] = l
            A[k + 1:, k + 1:] -= np.outer(l, A[k, k + 1:])
            blocks.append((k, 1))
        else:
            E = A[k:k + 2, k:k + 2]
            D[k:k + 2, k:k + 2] = E
            C = A[k + 2:, k:k + 2]
            det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
            if det == 0.0 or not np.isfinite(det):
                raise FactorizationBreakdown(f"singular 2x2 pivot at step {k}")
            Einv = np.array([[E[1, 1], -E[0, 1]], [-E[1, 0], E[0, 0]]]) / det
            Lb = C @ Einv
            L[k + 2:, k:k + 2] = Lb
            A[k + 2:, k + 2:] -= Lb @ C.T
            blocks.append((k, 2))
        k += step

    if not np.all(np.isfinite(D)):
        raise FactorizationBreakdown("non-finite entries in D")
    return LdlFactors(L=L, D=D, perm=perm, blocks=blocks)


def inertia_from_blocks(D: np.ndarray, blocks, tol: float = 0.0) -> tuple[int, int, int]:
    """``(n_pos, n_zero, n_neg)`` of a block-diagonal ``D``.

    Values within ``tol`` of zero count as zero.  A 2x2 block with negative
    determinant has one eigenvalue of each sign; with positive determinant
    both share the sign of the trace.
    """
    pos = zero = neg = 0
    for start, size in blocks:
        if size == 1:
            d = D[start, start]
            if d > tol:
                pos += 1
            elif d < -tol:
                neg += 1
            else:
                zero += 1
            continue
        a, b, c = D[start, start], D[start + 1, start], D[start + 1, start + 1]
        det = a * c - b * b
        tr = a + c
        scale = max(abs(a), abs(b), abs(c), tol)
        if det < -tol * scale:
            pos += 1
            neg += 1
        elif det > tol * scale:
            if tr > 0:
                pos += 2
            else:
                neg += 2
        else:
            # one eigenvalue ~0, the other ~trace
            zero += 1
            if tr > tol:
                pos += 1
            elif tr < -tol:
                neg += 1
            else:
                zero += 1
    return pos, zero, neg


def count_singvals_above(matrix, gamma: float) -> int:
    """Number of singular values ``>= gamma``, via the inertia of
    ``A^T A - gamma^2 I``.  Exact ties resolve to "above" within a relative
    slack of ``1e-12 gamma^2``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A = _as_dense(matrix)
    n = A.shape[1]
    if n > INERTIA_MAX_N:
        return count_singvals_above_svd(A, gamma)
    B = A.T @ A
    B[np.diag_indices_from(B)] -= gamma * gamma
    tol = TIE_RTOL * gamma * gamma
    try:
        f = ldl_bunch_kaufman(B)
    except FactorizationBreakdown as exc:
        log.warning("LDL^T breakdown (%s); counting with a direct SVD", exc)
        return count_singvals_above_svd(A, gamma)
    pos, zero, _ = inertia_from_blocks(f.D, f.blocks, tol)
    return pos + zero


def count_singvals_above_svd(matrix, gamma: float) -> int:
    """Reference count from a full SVD, same tie convention."""
    s = np.linalg.svd(_as_dense(matrix), compute_uv=False)
    return int(np.count_nonzero(s * s - gamma * gamma >= -TIE_RTOL * gamma * gamma))


# ---------------------------------------------------------------------------
# SVD and embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def r(self) -> int:
        return len(self.s)


def svd_truncated(matrix, r: int) -> SvdResult:
    """Top-``r`` singular triplets, sorted by decreasing singular value.

    Dense LAPACK for ``n <= 4096``; above that ARPACK Lanczos on the sparse
    matrix.
    """
    n = matrix.shape[0]
    if not 1 <= r <= min(matrix.shape):
        raise ValueError(f"r={r} outside [1, {min(matrix.shape)}]")
    if n <= DENSE_SVD_MAX_N or r >= min(matrix.shape) - 1:
        u, s, vt = np.linalg.svd(_as_dense(matrix), full_matrices=False)
        return SvdResult(u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy())
    try:
        u, s, vt = spla.svds(sp.csr_matrix(matrix, dtype=float), k=r,
                             which="LM", random_state=0)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.argsort(-s, kind="stable")
    return SvdResult(u[:, order], s[order], vt[order].T)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Rows are the points ``[s_1 u_1, ..., s_r u_r, s_1 v_1, ..., s_r v_r]``."""

    x_hat: np.ndarray
    r: int

    @property
    def n(self) -> int:
        return self.x_hat.shape[0]


def embed(svd: SvdResult, r: int) -> Embedding:
    if not 1 <= r <= svd.r:
        raise ValueError(f"embedding rank {r} outside [1, {svd.r}]")
    s = svd.s[:r]
    x = np.hstack([svd.u[:, :r] * s, svd.v[:, :r] * s])
    return Embedding(x_hat=x, r=r)


@dataclass(frozen=True, eq=False)
class LowRankPair:
    """Rank-``r`` truncation ``R = U_r S_r V_r^T`` kept in factored form.

    ``row0(x)`` returns row ``x`` of ``[R, R^T]`` (length ``2n``).
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def r(self) -> int:
        return len(self.s)

    def r_hat(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T

    def row0(self, x: int) -> np.ndarray:
        out_row = (self.u[x] * self.s) @ self.v.T
        in_col = self.u @ (self.s * self.v[x])
        return np.concatenate([out_row, in_col])

    def rows0(self, xs) -> np.ndarray:
        xs = np.atleast_1d(xs)
        out_rows = (self.u[xs] * self.s) @ self.v.T
        in_cols = (self.v[xs] * self.s) @ self.u.T
        return np.hstack([out_rows, in_cols])


def lowrank_rows(svd: SvdResult, r: int) -> LowRankPair:
    if not 1 <= r <= svd.r:
        raise ValueError(f"rank {r} outside [1, {svd.r}]")
    return LowRankPair(svd.u[:, :r], svd.s[:r], svd.v[:, :r])
