"""Transition counts, trimming of the most-visited states, degree profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .model import Trajectory


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Sparse ``n x n`` matrix of observed transitions ``x -> y``."""

    n: int
    matrix: sp.csr_matrix
    ell: int

    @property
    def entries(self) -> dict[tuple[int, int], int]:
        coo = self.matrix.tocoo()
        return {(int(x), int(y)): int(c) for x, y, c in zip(coo.row, coo.col, coo.data)}

    def dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(float)

    def in_counts(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel().astype(np.int64)

    def out_counts(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel().astype(np.int64)

    def to_text(self) -> str:
        """Coordinate format: header ``n ell``, then ``x y count`` per nonzero."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = [f"{self.n} {self.ell}"]
        lines += [f"{coo.row[i]} {coo.col[i]} {coo.data[i]}" for i in order]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CountMatrix":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        n, ell = int(rows[0][0]), int(rows[0][1])
        body = np.array(rows[1:], dtype=np.int64).reshape(-1, 3)
        m = sp.csr_matrix((body[:, 2], (body[:, 0], body[:, 1])), shape=(n, n), dtype=np.int64)
        return cls(n, m, ell)


def build_counts(traj: Trajectory) -> CountMatrix:
    s = traj.states
    n = traj.n
    data = np.ones(len(s) - 1, dtype=np.int64)
    m = sp.csr_matrix((data, (s[:-1], s[1:])), shape=(n, n), dtype=np.int64)
    m.sum_duplicates()
    return CountMatrix(n=n, matrix=m, ell=traj.ell)


def trim_size(n: int, ell: int) -> int:
    """Number of states removed: ``floor(n exp(-ell / n))``."""
    return int(math.floor(n * math.exp(-ell / n)))


@dataclass(frozen=True, eq=False)
class TrimmedCounts:
    base: CountMatrix
    gamma_set: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def ell(self) -> int:
        return self.base.ell

    @cached_property
    def keep(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.gamma_set] = False
        return mask

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Counts with rows and columns of trimmed states zeroed."""
        if len(self.gamma_set) == 0:
            return self.base.matrix
        d = sp.diags(self.keep.astype(np.int64))
        m = (d @ self.base.matrix @ d).tocsr()
        m.eliminate_zeros()
        return m

    def dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(float)


def trim(counts: CountMatrix) -> TrimmedCounts:
    """Drop the ``floor(n e^{-ell/n})`` states with the largest column sums;
    ties go to the smaller index."""
    g = trim_size(counts.n, counts.ell)
    if g == 0:
        return TrimmedCounts(counts, np.empty(0, dtype=np.int64))
    col = counts.in_counts()
    order = np.lexsort((np.arange(counts.n), -col))
    return TrimmedCounts(counts, np.sort(order[:g]))


@dataclass(frozen=True, eq=False)
class DegreeProfile:
    d_in: np.ndarray
    d_out: np.ndarray


def degrees(counts: CountMatrix) -> DegreeProfile:
    return DegreeProfile(d_in=counts.in_counts(), d_out=counts.out_counts())
