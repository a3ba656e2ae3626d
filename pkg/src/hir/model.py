"""Direct item-item association matrices, preference vectors and the assembled model."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import RatingsDataset
from .itemspace import Decomposition, NcdFactors, ncd_factors
from .sparse import SparseRowMatrix


def _rating_matrices(train: RatingsDataset) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    t = train.train
    shape = (train.n, train.m)
    ones = np.ones(len(t))
    B = sp.csr_matrix((ones, (t["user"], t["item"])), shape=shape)
    R = sp.csr_matrix((t["rating"].astype(np.float64), (t["user"], t["item"])), shape=shape)
    return B, R


def _zero_diagonal(M: sp.spmatrix) -> sp.csr_matrix:
    M = sp.csr_matrix(M - sp.diags(M.diagonal()))
    M.eliminate_zeros()
    return M


def cooccurrence(train: RatingsDataset) -> SparseRowMatrix:
    """Row-normalized co-rater counts; rows of items with no co-raters stay empty."""
    B, _ = _rating_matrices(train)
    return SparseRowMatrix.normalize_rows(_zero_diagonal(B.T @ B))


def adjusted_cosine(train: RatingsDataset) -> SparseRowMatrix:
    """Row-normalized, nonnegative adjusted-cosine item similarity.

    Ratings are centred on each user's mean over all of that user's training
    ratings. Numerator and both norms are summed over the co-raters of each
    item pair only. Negative similarities and pairs with a zero norm become 0.
    """
    B, R = _rating_matrices(train)
    counts = np.asarray(B.sum(axis=1)).ravel()
    totals = np.asarray(R.sum(axis=1)).ravel()
    means = np.divide(totals, counts, out=np.zeros_like(totals), where=counts > 0)
    C = R.copy()
    C.data -= np.repeat(means, np.diff(C.indptr))
    num = _zero_diagonal(C.T @ C).tocoo()
    keep = num.data > 0
    rows, cols, vals = num.row[keep], num.col[keep], num.data[keep]
    if len(vals) == 0:
        return SparseRowMatrix(sp.csr_matrix((train.m, train.m)))
    # Q[i, j]: squared deviations on item i over the users who also rated j
    Q = sp.csr_matrix(C.multiply(C).T @ B)
    den2 = np.asarray(Q[rows, cols]).ravel() * np.asarray(Q[cols, rows]).ravel()
    G = sp.csr_matrix((vals / np.sqrt(den2), (rows, cols)), shape=(train.m, train.m))
    return SparseRowMatrix.normalize_rows(G)


def preference_vector(train: RatingsDataset, user: int) -> np.ndarray:
    """Training ratings of ``user`` scaled to sum to 1; uniform if the user has none."""
    t = train.train[train.train["user"] == user]
    omega = np.zeros(train.m)
    if len(t) == 0:
        omega[:] = 1.0 / train.m
        return omega
    omega[t["item"]] = t["rating"] / t["rating"].sum()
    return omega


def preference_matrix(train: RatingsDataset, users: Sequence[int] | None = None) -> np.ndarray:
    """m x len(users) matrix whose columns are preference vectors (all users by default)."""
    users = np.arange(train.n) if users is None else np.asarray(users, dtype=np.int64)
    t = train.train
    col_of = np.full(train.n, -1)
    col_of[users] = np.arange(len(users))
    sel = col_of[t["user"]] >= 0
    W = np.zeros((train.m, len(users)))
    np.add.at(W, (t["item"][sel], col_of[t["user"][sel]]), t["rating"][sel].astype(np.float64))
    sums = W.sum(axis=0)
    empty = sums == 0
    W[:, ~empty] /= sums[~empty]
    W[:, empty] = 1.0 / train.m
    return W


def check_params(alpha: float, betas: Sequence[float], phi: float) -> None:
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if any(b < 0 for b in betas):
        raise ValueError("every beta must be >= 0")
    if not 0 <= phi <= 1:
        raise ValueError(f"phi must be in [0, 1], got {phi}")
    if alpha + sum(betas) >= 1:
        raise ValueError("alpha + beta must be < 1")


@dataclass(frozen=True, eq=False)
class HirModel:
    """Immutable HIR model.

    The iteration matrix ``alpha*C + sum(beta_l*D_l) + (1-alpha-beta)*E`` is
    never formed. ``direct_operator`` and ``ncd_operators`` hold the
    transposed, pre-scaled pieces the ranker multiplies by.
    """

    u_hat: SparseRowMatrix
    g_hat: SparseRowMatrix
    ncd: tuple[tuple[NcdFactors, float], ...]
    alpha: float
    phi: float

    def __post_init__(self):
        m = self.u_hat.rows
        for name in ("u_hat", "g_hat"):
            mat = getattr(self, name)
            if mat.shape != (m, m):
                raise ValueError(f"{name} must be {m}x{m}, got {mat.shape}")
            if np.any(mat.csr.diagonal() != 0):
                raise ValueError(f"{name} must have a zero diagonal")
        for factors, _ in self.ncd:
            if factors.X.rows != m or factors.Y.cols != m:
                raise ValueError("NCD factors do not match the item count")
        object.__setattr__(self, "ncd", tuple((f, float(b)) for f, b in self.ncd))
        check_params(self.alpha, self.betas, self.phi)

    @property
    def m(self) -> int:
        return self.u_hat.rows

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(b for _, b in self.ncd)

    @property
    def beta_total(self) -> float:
        return float(sum(self.betas))

    def with_params(self, alpha: float | None = None, phi: float | None = None,
                    betas: Sequence[float] | None = None) -> "HirModel":
        """Same matrices, different mixing weights."""
        ncd = self.ncd if betas is None else tuple(
            (f, b) for (f, _), b in zip(self.ncd, betas, strict=True)
        )
        return replace(
            self,
            alpha=self.alpha if alpha is None else alpha,
            phi=self.phi if phi is None else phi,
            ncd=ncd,
        )

    @cached_property
    def direct_operator(self) -> sp.csr_matrix:
        """``(alpha*phi*U_hat + alpha*(1-phi)*G_hat)^T`` in CSR layout."""
        a, f = self.alpha, self.phi
        M = (a * f) * self.u_hat.csr + (a * (1 - f)) * self.g_hat.csr
        M = sp.csr_matrix(M.T)
        M.eliminate_zeros()
        M.sort_indices()
        return _as_kernel_csr(M)

    @cached_property
    def ncd_operators(self) -> tuple[tuple[sp.csr_matrix, sp.csr_matrix], ...]:
        """``(X_l^T, beta_l * Y_l^T)`` pairs; zero-weight decompositions are dropped."""
        ops = []
        for factors, beta in self.ncd:
            if beta == 0:
                continue
            ops.append((
                _as_kernel_csr(sp.csr_matrix(factors.X.csr.T)),
                _as_kernel_csr(sp.csr_matrix(beta * factors.Y.csr.T)),
            ))
        return tuple(ops)

    def dense_iteration_matrix(self, omega: np.ndarray) -> np.ndarray:
        """The fully patched dense B for one user (small test instances only)."""
        m = self.m
        omega = np.asarray(omega, dtype=np.float64)

        def patched(mat: SparseRowMatrix) -> np.ndarray:
            return mat.toarray() + np.outer(mat.dangling(), omega)

        C = self.phi * patched(self.u_hat) + (1 - self.phi) * patched(self.g_hat)
        B = self.alpha * C + (1 - self.alpha - self.beta_total) * np.outer(np.ones(m), omega)
        for factors, beta in self.ncd:
            B += beta * (factors.X.csr @ factors.Y.csr).toarray()
        return B


def _as_kernel_csr(M: sp.csr_matrix) -> sp.csr_matrix:
    M.indptr = M.indptr.astype(np.int64)
    M.indices = M.indices.astype(np.int64)
    M.sort_indices()
    return M


def build_model(
    train: RatingsDataset,
    decompositions: Sequence[tuple[Decomposition, float]] = (),
    alpha: float = 0.8,
    phi: float = 0.5,
) -> HirModel:
    """Build Û, Ĝ and the NCD factors from the training split."""
    check_params(alpha, [b for _, b in decompositions], phi)
    for dec, _ in decompositions:
        if dec.m != train.m:
            raise ValueError(f"decomposition covers {dec.m} items, dataset has {train.m}")
    ncd = tuple((ncd_factors(dec), beta) for dec, beta in decompositions)
    return HirModel(cooccurrence(train), adjusted_cosine(train), ncd, alpha, phi)
