"""Rating data: MovieLens-format parsing, train/test splits and sparsified variants.

Ratings are held as numpy structured arrays (``RATING_DTYPE``) with dense
0-based user and item indices. Items are indexed over the full catalogue,
so an item with no training ratings still owns a row in every model matrix
and a score in every ranking.

All randomized operations draw from ``numpy.random.Generator(PCG64(seed))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, ParseError, ValidationError

RATING_DTYPE = np.dtype(
    [("user", np.int64), ("item", np.int64), ("rating", np.int64), ("timestamp", np.int64)]
)
MIN_RATING, MAX_RATING = 1, 5


class RatingTriple(NamedTuple):
    user: int
    item: int
    rating: int
    timestamp: int = 0


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide seeded generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def parse_ratings(path) -> list[RatingTriple]:
    """Read a ``user<TAB>item<TAB>rating<TAB>timestamp`` file.

    Ids are kept as they appear in the file; densification happens in
    :func:`load_split`.

    Raises
    ------
    ParseError
        On a wrong field count, a non-integer field or a rating outside 1..5.
    """
    triples = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ParseError(path, lineno, f"expected 4 tab-separated fields, got {len(fields)}")
            try:
                user, item, rating, ts = (int(f) for f in fields)
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
            if not MIN_RATING <= rating <= MAX_RATING:
                raise ParseError(path, lineno, f"rating {rating} outside {MIN_RATING}..{MAX_RATING}")
            triples.append(RatingTriple(user, item, rating, ts))
    return triples


def write_ratings(path, triples: Iterable[RatingTriple]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for t in triples:
            fh.write(f"{t.user}\t{t.item}\t{t.rating}\t{t.timestamp}\n")


def _to_array(triples: Sequence[RatingTriple]) -> np.ndarray:
    arr = np.empty(len(triples), dtype=RATING_DTYPE)
    if triples:
        arr[:] = [tuple(t) for t in triples]
    return arr


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _pair_keys(arr: np.ndarray, m: int) -> np.ndarray:
    return arr["user"] * m + arr["item"]


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    """Users, items and a disjoint train/test partition of their ratings.

    ``train`` and ``test`` are read-only ``RATING_DTYPE`` arrays using dense
    indices; ``user_ids[u]`` / ``item_ids[v]`` give the original ids.
    """

    n: int
    m: int
    train: np.ndarray
    test: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray

    def __post_init__(self):
        for name in ("train", "test", "user_ids", "item_ids"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if len(self.user_ids) != self.n or len(self.item_ids) != self.m:
            raise ValidationError("id maps do not match the user/item counts")
        for name in ("train", "test"):
            arr = getattr(self, name)
            if len(arr) == 0:
                continue
            if arr["user"].min() < 0 or arr["user"].max() >= self.n:
                raise ValidationError(f"{name}: user index out of range")
            if arr["item"].min() < 0 or arr["item"].max() >= self.m:
                raise ValidationError(f"{name}: item index out of range")
            if arr["rating"].min() < MIN_RATING or arr["rating"].max() > MAX_RATING:
                raise ValidationError(f"{name}: rating outside {MIN_RATING}..{MAX_RATING}")
            keys = _pair_keys(arr, self.m)
            if len(np.unique(keys)) != len(keys):
                raise ValidationError(f"{name}: duplicate (user, item) pair")
        overlap = np.intersect1d(_pair_keys(self.train, self.m), _pair_keys(self.test, self.m))
        if len(overlap):
            u, v = divmod(int(overlap[0]), self.m)
            raise ValidationError(
                f"{len(overlap)} (user, item) pairs appear in both train and test, "
                f"e.g. user {self.user_ids[u]} item {self.item_ids[v]}"
            )

    def _per_user(self, arr: np.ndarray) -> list[np.ndarray]:
        order = np.lexsort((arr["item"], arr["user"]))
        users = arr["user"][order]
        bounds = np.searchsorted(users, np.arange(self.n + 1))
        items = arr["item"][order]
        return [_readonly(items[bounds[u]:bounds[u + 1]]) for u in range(self.n)]

    @cached_property
    def user_train_items(self) -> list[np.ndarray]:
        """Per-user sorted item indices in the training split (L_i)."""
        return self._per_user(self.train)

    @cached_property
    def user_test_items(self) -> list[np.ndarray]:
        """Per-user sorted item indices in the test split (T_i)."""
        return self._per_user(self.test)

    def unseen_items(self, user: int) -> np.ndarray:
        """Items the user rated in neither split."""
        seen = np.zeros(self.m, dtype=bool)
        seen[self.user_train_items[user]] = True
        seen[self.user_test_items[user]] = True
        return np.flatnonzero(~seen)

    @cached_property
    def user_index(self) -> dict[int, int]:
        return {int(uid): u for u, uid in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> dict[int, int]:
        return {int(iid): v for v, iid in enumerate(self.item_ids)}

    def item_counts(self) -> np.ndarray:
        """Number of training ratings per item."""
        return np.bincount(self.train["item"], minlength=self.m)

    def with_train(self, train: np.ndarray) -> "RatingsDataset":
        return RatingsDataset(self.n, self.m, train, self.test, self.user_ids, self.item_ids)

    def triples(self, split: str = "train") -> list[RatingTriple]:
        """Triples of a split translated back to original ids."""
        arr = getattr(self, split)
        return [
            RatingTriple(int(self.user_ids[u]), int(self.item_ids[v]), int(r), int(t))
            for u, v, r, t in arr.tolist()
        ]


def load_split(base_path, test_path, item_count: int | None = None, *, item_ids=None) -> RatingsDataset:
    """Load a train/test pair of rating files into a :class:`RatingsDataset`.

    The item catalogue is either ``1..item_count`` (MovieLens convention) or
    the explicit ``item_ids`` sequence; every rated item must belong to it.
    Users are the sorted union of ids appearing in either file.
    """
    if item_ids is None:
        if item_count is None:
            raise ValueError("either item_count or item_ids is required")
        item_ids = np.arange(1, item_count + 1)
    item_ids = np.asarray(item_ids, dtype=np.int64)
    if len(np.unique(item_ids)) != len(item_ids):
        raise ValidationError("item catalogue contains duplicate ids")

    base = _to_array(parse_ratings(base_path))
    test = _to_array(parse_ratings(test_path))

    user_ids = np.union1d(base["user"], test["user"])
    sorter = np.argsort(item_ids)
    for name, arr in (("base", base), ("test", test)):
        pos = np.searchsorted(item_ids, arr["item"], sorter=sorter)
        pos = np.minimum(pos, len(item_ids) - 1)
        idx = sorter[pos]
        bad = item_ids[idx] != arr["item"]
        if bad.any():
            raise ValidationError(f"{name} file rates item {arr['item'][bad][0]} outside the catalogue")
        arr["item"] = idx
        arr["user"] = np.searchsorted(user_ids, arr["user"])
    return RatingsDataset(len(user_ids), len(item_ids), base, test, user_ids, item_ids)


def movielens_item_count(data_dir) -> int:
    with open(Path(data_dir) / "u.item", encoding="latin-1") as fh:
        return sum(1 for line in fh if line.strip())


def load_movielens_fold(data_dir, fold: int) -> RatingsDataset:
    """Load predefined MovieLens 100K fold ``u{fold}.base`` / ``u{fold}.test``."""
    data_dir = Path(data_dir)
    paths = [data_dir / f"u{fold}.base", data_dir / f"u{fold}.test", data_dir / "u.item"]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise ConfigurationError(f"missing MovieLens files: {', '.join(missing)}")
    return load_split(paths[0], paths[1], movielens_item_count(data_dir))


def subsample(dataset: RatingsDataset, fraction: float, seed: int) -> RatingsDataset:
    """Keep a uniformly random ``round(fraction * |train|)`` subset of the training ratings.

    The count is rounded half-up. The test split is untouched and the kept
    ratings retain their original order.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    total = len(dataset.train)
    keep = math.floor(Fraction(str(fraction)) * total + Fraction(1, 2))
    if keep == total:
        return dataset
    chosen = np.sort(make_rng(seed).permutation(total)[:keep])
    return dataset.with_train(dataset.train[chosen])


def degrade_items(
    dataset: RatingsDataset,
    count: int,
    min_ratings: int = 30,
    keep_fraction: float = 0.1,
    seed: int = 0,
) -> tuple[RatingsDataset, np.ndarray]:
    """Turn ``count`` well-rated items into "new" items by deleting most of their ratings.

    Items are drawn uniformly among those with at least ``min_ratings``
    training ratings; each keeps ``ceil(keep_fraction * r)`` of its ``r``
    ratings, chosen uniformly. Returns the modified dataset and the sorted
    affected item indices.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    counts = dataset.item_counts()
    eligible = np.flatnonzero(counts >= min_ratings)
    if len(eligible) < count:
        raise ValueError(
            f"only {len(eligible)} items have >= {min_ratings} training ratings, {count} requested"
        )
    rng = make_rng(seed)
    affected = np.sort(eligible[rng.permutation(len(eligible))[:count]])
    ratio = Fraction(str(keep_fraction))
    keep_mask = np.ones(len(dataset.train), dtype=bool)
    items = dataset.train["item"]
    for v in affected:
        rows = np.flatnonzero(items == v)
        kept = math.ceil(ratio * len(rows))
        drop = rows[rng.permutation(len(rows))[kept:]]
        keep_mask[drop] = False
    return dataset.with_train(dataset.train[keep_mask]), affected
