"""Block decompositions of the item space and the factored NCD proximity matrix.

A decomposition is a family of (possibly overlapping) item blocks covering
every item. The proximity matrix D spreads an item's mass uniformly over
the blocks containing it and then uniformly over each block's members. It
is stored as the product ``D = X @ Y`` of two row-stochastic factors,
``X`` (items x blocks) and ``Y`` (blocks x items); D itself is only
materialized for small test instances.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError
from .sparse import SparseRowMatrix

MOVIELENS_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western",
)
MAX_DENSE_ITEMS = 50


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Item blocks ``block_members[k]`` over ``m`` items, with display labels."""

    m: int
    block_members: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.block_members):
            raise ValidationError("one label per block is required")
        members = []
        for k, block in enumerate(self.block_members):
            block = np.asarray(block, dtype=np.int64)
            if len(block) == 0:
                raise ValidationError(f"block {self.labels[k]!r} is empty")
            if len(np.unique(block)) != len(block):
                raise ValidationError(f"block {self.labels[k]!r} lists an item twice")
            if block.min() < 0 or block.max() >= self.m:
                raise ValidationError(f"block {self.labels[k]!r} has an item index out of range")
            block = np.sort(block)
            block.setflags(write=False)
            members.append(block)
        object.__setattr__(self, "block_members", tuple(members))
        uncovered = np.flatnonzero(self.block_counts == 0)
        if len(uncovered):
            raise ValidationError(f"{len(uncovered)} items belong to no block (first: {uncovered[0]})")

    @classmethod
    def from_memberships(cls, m: int, pairs: Iterable[tuple[int, str]]) -> "Decomposition":
        """Build from ``(item_index, block_label)`` pairs; block order follows first appearance."""
        blocks: dict[str, list[int]] = {}
        for item, label in pairs:
            blocks.setdefault(label, []).append(item)
        return cls(m, tuple(np.array(v) for v in blocks.values()), tuple(blocks))

    @property
    def block_count(self) -> int:
        return len(self.block_members)

    @cached_property
    def membership(self) -> sp.csr_matrix:
        """The 0/1 aggregation matrix, items x blocks."""
        rows = np.concatenate(self.block_members)
        cols = np.repeat(np.arange(self.block_count), [len(b) for b in self.block_members])
        return sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.m, self.block_count)
        )

    @cached_property
    def block_counts(self) -> np.ndarray:
        """N_v: number of blocks each item belongs to."""
        counts = np.zeros(self.m, dtype=np.int64)
        for block in self.block_members:
            counts[block] += 1
        return counts

    @cached_property
    def item_blocks(self) -> list[np.ndarray]:
        m = self.membership
        return [m.indices[m.indptr[v]:m.indptr[v + 1]].copy() for v in range(self.m)]

    def permuted(self, perm: Sequence[int]) -> "Decomposition":
        """Relabel items: old item ``v`` becomes ``perm[v]``."""
        perm = np.asarray(perm)
        return Decomposition(self.m, tuple(perm[b] for b in self.block_members), self.labels)


@dataclass(frozen=True, eq=False)
class NcdFactors:
    """Row-stochastic factors with ``D = X @ Y``."""

    X: SparseRowMatrix
    Y: SparseRowMatrix

    def materialize(self) -> np.ndarray:
        """Dense D for small instances (at most 50 items)."""
        if self.X.rows > MAX_DENSE_ITEMS:
            raise ValueError(f"refusing to materialize D for {self.X.rows} > {MAX_DENSE_ITEMS} items")
        return (self.X.csr @ self.Y.csr).toarray()


def ncd_factors(decomposition: Decomposition) -> NcdFactors:
    A = decomposition.membership
    return NcdFactors(SparseRowMatrix.normalize_rows(A), SparseRowMatrix.normalize_rows(A.T))


def proximal_set(decomposition: Decomposition, item: int) -> np.ndarray:
    """Sorted union of the members of every block containing ``item``."""
    if not 0 <= item < decomposition.m:
        raise ValueError(f"item index {item} out of range 0..{decomposition.m - 1}")
    blocks = decomposition.item_blocks[item]
    return np.unique(np.concatenate([decomposition.block_members[k] for k in blocks]))


def parse_item_blocks(path, genre_count: int = len(MOVIELENS_GENRES)) -> Decomposition:
    """Genre decomposition from a MovieLens ``u.item`` file.

    Lines are ``id|title|release|video release|url|flag_1|...|flag_G``. Item
    ids must run 1..m in order. An item with no flag set is put in the first
    ("unknown") block so that every item is covered.
    """
    n_fields = 5 + genre_count
    flags_rows = []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("|")
            if len(fields) != n_fields:
                raise ParseError(path, lineno, f"expected {n_fields} '|'-separated fields, got {len(fields)}")
            try:
                item_id = int(fields[0])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer item id {fields[0]!r}") from None
            if item_id != len(flags_rows) + 1:
                raise ParseError(path, lineno, f"item id {item_id} out of sequence")
            flags = fields[5:]
            if any(f not in ("0", "1") for f in flags):
                raise ParseError(path, lineno, "genre flags must be 0 or 1")
            flags_rows.append([f == "1" for f in flags])
    flags = np.array(flags_rows, dtype=bool).reshape(-1, genre_count)
    flags[~flags.any(axis=1), 0] = True
    labels = MOVIELENS_GENRES if genre_count == len(MOVIELENS_GENRES) else tuple(
        f"genre{k}" for k in range(genre_count)
    )
    keep = flags.any(axis=0)
    members = tuple(np.flatnonzero(flags[:, k]) for k in range(genre_count) if keep[k])
    return Decomposition(len(flags), members, tuple(l for l, k in zip(labels, keep) if k))


def parse_block_file(path, item_index: dict[int, int], m: int) -> Decomposition:
    """Generic ``item_id<TAB>block_label`` membership file, one membership per line."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(path, lineno, f"expected 2 tab-separated fields, got {len(fields)}")
            try:
                item = item_index[int(fields[0])]
            except (ValueError, KeyError):
                raise ParseError(path, lineno, f"unknown item id {fields[0]!r}") from None
            pairs.append((item, fields[1]))
    return Decomposition.from_memberships(m, pairs)
