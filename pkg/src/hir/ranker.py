"""Power iteration for the HIR stationary vectors, per user and in batch."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import HirModel


@dataclass(frozen=True)
class ConvergenceParams:
    tol: float = 1e-8
    maxit: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.maxit < 1:
            raise ValueError(f"maxit must be >= 1, got {self.maxit}")


@dataclass(frozen=True, eq=False)
class RankVector:
    scores: np.ndarray
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Column ``u`` is the stationary vector of user ``u``."""

    scores: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    tol: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if len(self.residuals) else 0.0

    @property
    def converged(self) -> bool:
        return self.max_residual < self.tol

    def column(self, u: int) -> RankVector:
        res = float(self.residuals[u])
        return RankVector(self.scores[:, u].copy(), int(self.iterations[u]), res, res < self.tol)


# Columns per kernel call: keeps the dense operand of one call within L2.
COLUMN_CHUNK = 128


def _matmat(A, P: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], P.shape[1]))
    n = P.shape[1]
    if n <= COLUMN_CHUNK:
        kernels.csr_matmat(A.indptr, A.indices, A.data, P, out)
        return out
    for c0 in range(0, n, COLUMN_CHUNK):
        c1 = min(n, c0 + COLUMN_CHUNK)
        part = np.empty((A.shape[0], c1 - c0))
        kernels.csr_matmat(A.indptr, A.indices, A.data, np.ascontiguousarray(P[:, c0:c1]), part)
        out[:, c0:c1] = part
    return out


def _multiply(model: HirModel, PI: np.ndarray) -> np.ndarray:
    """``t`` for every column of ``PI``: the walk's mass before teleport and dangling redistribution."""
    T = _matmat(model.direct_operator, PI)
    for Xt, Yt in model.ncd_operators:
        T += _matmat(Yt, _matmat(Xt, PI))
    return T


def _step(model: HirModel, PI: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T = _multiply(model, PI)
    residual = np.empty(PI.shape[1])
    kernels.redistribute(T, W, PI, residual)
    return T, residual


def iterate_once(model: HirModel, pi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """One application of the patched iteration matrix, ``pi^T B``, renormalized."""
    pi = np.ascontiguousarray(np.asarray(pi, dtype=np.float64).reshape(-1, 1))
    omega = np.ascontiguousarray(np.asarray(omega, dtype=np.float64).reshape(-1, 1))
    out, _ = _step(model, pi, omega)
    return out[:, 0]


def _iterate(model: HirModel, W: np.ndarray, conv: ConvergenceParams, history=None):
    """Power iteration on the columns of ``W``; a column stops once its residual drops below tol."""
    n = W.shape[1]
    PI = W.copy()
    iterations = np.zeros(n, dtype=np.int64)
    residuals = np.full(n, np.inf)
    active = np.arange(n)
    for it in range(1, conv.maxit + 1):
        if len(active) == n:
            new, res = _step(model, PI, W)
            PI = new
        else:
            new, res = _step(model, np.ascontiguousarray(PI[:, active]), np.ascontiguousarray(W[:, active]))
            PI[:, active] = new
        iterations[active] = it
        residuals[active] = res
        if history is not None:
            history.append(residuals.copy())
        active = active[res >= conv.tol]
        if len(active) == 0:
            break
    return PI, iterations, residuals


def rank_user(model: HirModel, omega: np.ndarray, conv: ConvergenceParams = ConvergenceParams(),
              history: list | None = None) -> RankVector:
    """Stationary vector for a single preference vector, starting from ``omega``.

    If ``history`` is a list, the residual after every iteration is appended to it.
    """
    W = np.ascontiguousarray(np.asarray(omega, dtype=np.float64).reshape(-1, 1))
    if W.shape[0] != model.m:
        raise ValueError(f"preference vector has length {W.shape[0]}, model has {model.m} items")
    hist = [] if history is not None else None
    PI, its, res = _iterate(model, W, conv, hist)
    if history is not None:
        history.extend(float(h[0]) for h in hist)
    return RankVector(PI[:, 0], int(its[0]), float(res[0]), bool(res[0] < conv.tol))


def rank_all(model: HirModel, prefs: np.ndarray, conv: ConvergenceParams = ConvergenceParams(),
             jobs: int | None = None) -> RankMatrix:
    """Batch power iteration: one sparse pass per iteration serves every column.

    Columns are split into ``jobs`` contiguous chunks ranked on separate
    threads (the kernels release the GIL). Column results do not depend on
    the split.
    """
    prefs = np.asarray(prefs, dtype=np.float64)
    if prefs.ndim != 2 or prefs.shape[0] != model.m:
        raise ValueError(f"preference matrix must be {model.m} x n, got {prefs.shape}")
    n = prefs.shape[1]
    jobs = max(1, min(jobs or 1, n))
    chunks = np.array_split(np.arange(n), jobs)
    if jobs == 1:
        results = [_iterate(model, np.ascontiguousarray(prefs), conv)]
    else:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(
                lambda idx: _iterate(model, np.ascontiguousarray(prefs[:, idx]), conv), chunks
            ))
    PI = np.empty_like(prefs)
    iterations = np.empty(n, dtype=np.int64)
    residuals = np.empty(n)
    for idx, (P, its, res) in zip(chunks, results):
        PI[:, idx] = P
        iterations[idx] = its
        residuals[idx] = res
    return RankMatrix(PI, iterations, residuals, conv.tol)


def top_n(scores: np.ndarray, exclude: Iterable[int], n: int) -> list[int]:
    """The ``n`` best-scored items outside ``exclude``; ties go to the lower index."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scores = np.asarray(scores)
    mask = np.ones(len(scores), dtype=bool)
    mask[np.fromiter(exclude, dtype=np.int64)] = False
    candidates = np.flatnonzero(mask)
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order[:n]].tolist()


def write_rankings(fh, rows: Sequence[tuple[int, Sequence[int], np.ndarray]],
                   user_ids: np.ndarray, item_ids: np.ndarray, header: bool = True) -> None:
    """CSV ``user_id,item_id,score,rank`` to an open text file.

    ``rows`` holds ``(user, items, scores)`` triples in output order, with
    dense indices; ids are translated back through ``user_ids``/``item_ids``.
    """
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(["user_id", "item_id", "score", "rank"])
    for user, items, scores in rows:
        for rank, v in enumerate(items, start=1):
            w.writerow([int(user_ids[user]), int(item_ids[v]), repr(float(scores[v])), rank])
