"""Ranking-quality metrics: degree of agreement, Kendall's tau, and the popularity baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy import stats

from .dataset import RatingsDataset
from .errors import EvaluationError


class UserDoa(NamedTuple):
    user: int
    doa: float
    correct: int
    pairs: int


@dataclass(frozen=True)
class DoaReport:
    per_user: tuple[UserDoa, ...]
    macro: float
    micro: float
    skipped_users: int

    @property
    def correct(self) -> int:
        return sum(r.correct for r in self.per_user)

    @property
    def pairs(self) -> int:
        return sum(r.pairs for r in self.per_user)


def doa_counts(scores: np.ndarray, test_items, unseen_items) -> tuple[int, int]:
    """``(correct, pairs)``: test/unseen pairs where the test item scores strictly higher."""
    scores = np.asarray(scores)
    test_items = np.asarray(test_items, dtype=np.int64)
    unseen = np.sort(scores[np.asarray(unseen_items, dtype=np.int64)])
    correct = int(np.searchsorted(unseen, scores[test_items], side="left").sum())
    return correct, len(test_items) * len(unseen)


def doa_user(scores: np.ndarray, test_items, unseen_items) -> tuple[float, int]:
    """Fraction of correctly ordered (test, unseen) pairs; ties count as wrong."""
    if len(test_items) == 0:
        raise EvaluationError("DOA is undefined for a user with no test items")
    if len(unseen_items) == 0:
        raise EvaluationError("DOA is undefined for a user with no unseen items")
    correct, pairs = doa_counts(scores, test_items, unseen_items)
    return correct / pairs, pairs


def doa_aggregate(results: Iterable[UserDoa], skipped: int = 0) -> DoaReport:
    results = tuple(results)
    if not results:
        raise EvaluationError("no user with a nonempty test set")
    macro = math.fsum(r.doa for r in results) / len(results)
    micro = sum(r.correct for r in results) / sum(r.pairs for r in results)
    return DoaReport(results, macro, micro, skipped)


def evaluate_doa(scores: np.ndarray, dataset: RatingsDataset) -> DoaReport:
    """Macro and micro DOA of an ``m x n`` score matrix (column per user) against the test split."""
    scores = np.asarray(scores)
    if scores.shape != (dataset.m, dataset.n):
        raise ValueError(f"score matrix must be {dataset.m} x {dataset.n}, got {scores.shape}")
    results = []
    skipped = 0
    for u in range(dataset.n):
        test = dataset.user_test_items[u]
        if len(test) == 0:
            skipped += 1
            continue
        unseen = dataset.unseen_items(u)
        if len(unseen) == 0:
            raise EvaluationError(f"user {dataset.user_ids[u]} has rated every item")
        correct, pairs = doa_counts(scores[:, u], test, unseen)
        results.append(UserDoa(u, correct / pairs, correct, pairs))
    return doa_aggregate(results, skipped)


def _tied_pairs(x: np.ndarray) -> int:
    _, counts = np.unique(x, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def concordance(a: np.ndarray, b: np.ndarray) -> int:
    """Concordant minus discordant pairs; pairs tied in either vector count as neither.

    Recovered exactly from the O(m log m) tau-b statistic and the tie counts.
    """
    m = len(a)
    n0 = m * (m - 1) // 2
    n1, n2 = _tied_pairs(a), _tied_pairs(b)
    if n1 == n0 or n2 == n0:
        return 0
    tau_b = stats.kendalltau(a, b, variant="b").statistic
    return int(round(tau_b * math.sqrt((n0 - n1) * (n0 - n2))))


def kendall_tau(a, b) -> float:
    """(concordant - discordant) / (m(m-1)/2), with ties in either vector scoring zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"score vectors must be 1-D of equal length, got {a.shape} and {b.shape}")
    m = len(a)
    if m < 2:
        raise ValueError("kendall_tau needs at least two items")
    return concordance(a, b) / (m * (m - 1) // 2)


def maxf_scores(train: RatingsDataset) -> np.ndarray:
    """Popularity: each item's training rating count, normalized to sum 1 (uniform if no ratings)."""
    counts = train.item_counts().astype(np.float64)
    total = counts.sum()
    if total == 0:
        return np.full(train.m, 1.0 / train.m)
    return counts / total
