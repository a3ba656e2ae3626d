"""Row-(sub)stochastic sparse matrices in compressed-row layout.

Storage and the sparse products themselves are scipy's CSR; this module adds
the invariants the ranking model relies on (strictly positive stored values,
every row either empty or summing to one) and a plain-text coordinate cache
format.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

ROW_SUM_TOL = 1e-12


class SparseRowMatrix:
    """A nonnegative matrix whose nonempty rows each sum to 1.

    Empty rows are "dangling": the ranker redirects their probability mass
    to the user's preference vector.
    """

    __slots__ = ("_csr",)

    def __init__(self, matrix, *, check: bool = True):
        csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if check:
            if np.any(csr.data < 0):
                raise ValueError("stored values must be positive")
            sums = np.asarray(csr.sum(axis=1)).ravel()
            nonempty = np.diff(csr.indptr) > 0
            if np.any(np.abs(sums[nonempty] - 1.0) > ROW_SUM_TOL):
                raise ValueError("every nonempty row must sum to 1")
        csr.data.setflags(write=False)
        csr.indices.setflags(write=False)
        csr.indptr.setflags(write=False)
        self._csr = csr

    @classmethod
    def normalize_rows(cls, matrix) -> "SparseRowMatrix":
        """Row-normalize a nonnegative matrix; all-zero rows stay empty."""
        csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        csr.eliminate_zeros()
        if np.any(csr.data < 0):
            raise ValueError("cannot normalize a matrix with negative entries")
        sums = np.asarray(csr.sum(axis=1)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        return cls(sp.diags(scale) @ csr)

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        """The underlying (read-only) scipy CSR matrix."""
        return self._csr

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values stored in row ``i``."""
        lo, hi = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def dangling(self) -> np.ndarray:
        """Boolean mask of empty rows."""
        return np.diff(self._csr.indptr) == 0

    def density(self) -> float:
        r, c = self.shape
        return self.nnz / (r * c) if r and c else 0.0

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, other):
        return self._csr @ other

    def __repr__(self):
        return f"SparseRowMatrix(shape={self.shape}, nnz={self.nnz})"

    def save(self, path) -> None:
        """Write ``rows cols nnz`` then one ``row col value`` line per entry (17 significant digits)."""
        coo = self._csr.tocoo()
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"{self.rows} {self.cols} {self.nnz}\n")
            for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
                fh.write(f"{i} {j} {v:.17g}\n")

    @classmethod
    def load(cls, path) -> "SparseRowMatrix":
        with open(Path(path), encoding="ascii") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}: bad header")
            rows, cols, nnz = (int(h) for h in header)
            body = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
        if len(body) != nnz:
            raise ValueError(f"{path}: header announces {nnz} entries, found {len(body)}")
        i = body[:, 0].astype(np.int64)
        j = body[:, 1].astype(np.int64)
        return cls(sp.csr_matrix((body[:, 2], (i, j)), shape=(rows, cols)))
