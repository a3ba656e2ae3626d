"""MovieLens 100K experiment drivers and their CSV artifacts.

Every driver is a pure function of the data directory and the
:class:`ExperimentConfig`; random draws use seeds derived from
``(config.seed, fold, ...)`` through ``numpy.random.SeedSequence`` so any
single cell can be rerun in isolation.
"""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .dataset import RatingsDataset, degrade_items, load_movielens_fold, subsample
from .errors import ConfigurationError
from .itemspace import Decomposition, parse_item_blocks
from .metrics import DoaReport, evaluate_doa, kendall_tau, maxf_scores
from .model import HirModel, check_params, build_model, preference_matrix
from .ranker import ConvergenceParams, rank_all, rank_user

FOLDS = (1, 2, 3, 4, 5)
VARIANTS = ("hir", "itemrank", "simrank")


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: Path = Path("data/ml-100k")
    alpha: float = 0.8
    beta: float = 0.1
    phi: float = 0.5
    beta_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.3, 0.4)
    grid_total: float = 0.9
    fractions: tuple[float, ...] = (0.8, 0.6, 0.4)
    new_item_counts: tuple[int, ...] = (100, 200, 300)
    min_ratings: int = 30
    keep_fraction: float = 0.1
    seed: int = 0
    conv: ConvergenceParams = field(default_factory=ConvergenceParams)
    folds: tuple[int, ...] = FOLDS
    jobs: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        check_params(self.alpha, [self.beta], self.phi)
        for b in self.beta_grid:
            check_params(self.grid_alpha(b), [b], self.phi)
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        if any(f not in FOLDS for f in self.folds):
            raise ValueError(f"folds must be drawn from {FOLDS}")

    def grid_alpha(self, beta: float) -> float:
        """alpha paired with ``beta`` on the fixed-total grid, rounded to kill float noise (0.9 - 0.1)."""
        return round(self.grid_total - beta, 12)

    def variant_params(self, variant: str) -> tuple[float, float, float]:
        """``(alpha, beta, phi)``; the single-component variants move beta's weight onto alpha."""
        if variant == "hir":
            return self.alpha, self.beta, self.phi
        if variant == "itemrank":
            return round(self.alpha + self.beta, 12), 0.0, 1.0
        if variant == "simrank":
            return round(self.alpha + self.beta, 12), 0.0, 0.0
        raise ValueError(f"unknown variant {variant!r}")

    def metadata(self) -> dict[str, str]:
        d = asdict(self)
        d["data_dir"] = str(self.data_dir)
        d["conv"] = f"tol={self.conv.tol:g},maxit={self.conv.maxit}"
        d.pop("jobs")
        return {"version": __version__, "rng": "numpy PCG64 via SeedSequence", **{k: str(v) for k, v in d.items()}}


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


class Workspace:
    """Loaded folds plus the decomposition, cached so grid points share the heavy matrices."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._folds: dict[int, RatingsDataset] = {}
        self._bases: dict[int, HirModel] = {}

    @cached_property
    def genres(self) -> Decomposition:
        path = self.config.data_dir / "u.item"
        if not path.is_file():
            raise ConfigurationError(f"missing MovieLens file: {path}")
        return parse_item_blocks(path)

    def fold(self, k: int) -> RatingsDataset:
        if k not in self._folds:
            self._folds[k] = load_movielens_fold(self.config.data_dir, k)
        return self._folds[k]

    def base_model(self, k: int) -> HirModel:
        if k not in self._bases:
            self._bases[k] = self.model_for(self.fold(k))
        return self._bases[k]

    def model_for(self, ds: RatingsDataset) -> HirModel:
        return build_model(ds, [(self.genres, 0.0)], alpha=0.0, phi=0.5)

    def rank(self, model: HirModel, ds: RatingsDataset, alpha: float, beta: float, phi: float) -> np.ndarray:
        tuned = model.with_params(alpha=alpha, phi=phi, betas=[beta])
        return rank_all(tuned, preference_matrix(ds), self.config.conv, self.config.jobs).scores


@dataclass(frozen=True)
class FoldScore:
    fold: int
    variant: str
    alpha: float
    beta: float
    phi: float
    report: DoaReport


@dataclass(frozen=True)
class CvResult:
    scores: tuple[FoldScore, ...]

    def _values(self, attr: str) -> list[float]:
        return [100 * getattr(s.report, attr) for s in self.scores]

    @property
    def macro_mean(self) -> float:
        return statistics.fmean(self._values("macro"))

    @property
    def micro_mean(self) -> float:
        return statistics.fmean(self._values("micro"))

    @property
    def macro_std(self) -> float:
        v = self._values("macro")
        return statistics.stdev(v) if len(v) > 1 else 0.0

    @property
    def micro_std(self) -> float:
        v = self._values("micro")
        return statistics.stdev(v) if len(v) > 1 else 0.0

    def summary(self) -> str:
        return (f"macro_doa={self.macro_mean:.4f}±{self.macro_std:.4f} "
                f"micro_doa={self.micro_mean:.4f}±{self.micro_std:.4f}")


def evaluate_fold(ws: Workspace, k: int, variant: str, alpha: float, beta: float, phi: float) -> FoldScore:
    ds = ws.fold(k)
    if variant == "maxf":
        scores = np.repeat(maxf_scores(ds)[:, None], ds.n, axis=1)
    else:
        scores = ws.rank(ws.base_model(k), ds, alpha, beta, phi)
    return FoldScore(k, variant, alpha, beta, phi, evaluate_doa(scores, ds))


def cross_validate(config: ExperimentConfig, variant: str = "hir", ws: Workspace | None = None,
                   params: tuple[float, float, float] | None = None) -> CvResult:
    """DOA on each predefined fold for one variant; ``params`` overrides ``(alpha, beta, phi)``."""
    ws = ws or Workspace(config)
    if variant == "maxf":
        params = (math.nan, math.nan, math.nan)
    elif params is None:
        params = config.variant_params(variant)
    else:
        check_params(params[0], [params[1]], params[2])
    return CvResult(tuple(evaluate_fold(ws, k, variant, *params) for k in config.folds))


def phi_sweep(config: ExperimentConfig, phi_grid: Sequence[float], alpha: float | None = None,
              beta: float | None = None, ws: Workspace | None = None) -> list[tuple[float, CvResult]]:
    if any(not 0 <= p <= 1 for p in phi_grid):
        raise ValueError("phi grid values must lie in [0, 1]")
    ws = ws or Workspace(config)
    alpha = config.alpha if alpha is None else alpha
    beta = config.beta if beta is None else beta
    return [(phi, cross_validate(config, "hir", ws, (alpha, beta, phi))) for phi in phi_grid]


def default_phi_grid() -> list[float]:
    return [k / 10 for k in range(11)]


@dataclass(frozen=True)
class SparsityRow:
    fraction: float
    variant: str
    fold: int
    train_size: int
    report: DoaReport


def sparsity_experiment(config: ExperimentConfig, ws: Workspace | None = None) -> list[SparsityRow]:
    """Subsample each fold's training set and score the three variants on the untouched test set."""
    ws = ws or Workspace(config)
    rows = []
    for k in config.folds:
        for fraction in config.fractions:
            ds = subsample(ws.fold(k), fraction, derive_seed(config.seed, k, round(fraction * 10**6)))
            model = ws.base_model(k) if ds is ws.fold(k) else ws.model_for(ds)
            for variant in VARIANTS:
                scores = ws.rank(model, ds, *config.variant_params(variant))
                rows.append(SparsityRow(fraction, variant, k, len(ds.train), evaluate_doa(scores, ds)))
    return rows


@dataclass(frozen=True)
class LocalRow:
    count: int
    beta: float
    fold: int
    tau: float


@dataclass(frozen=True)
class LocalResult:
    rows: tuple[LocalRow, ...]
    betas: tuple[float, ...]
    counts: tuple[int, ...]

    def table(self) -> dict[int, list[float]]:
        """Fold-averaged tau, one list over ``betas`` per count."""
        out = {}
        for c in self.counts:
            out[c] = [statistics.fmean(r.tau for r in self.rows if r.count == c and r.beta == b)
                      for b in self.betas]
        return out

    def monotone_violations(self) -> list[tuple[int, int]]:
        """``(fold, count)`` runs where tau decreases somewhere along the beta grid."""
        bad = []
        for fold in sorted({r.fold for r in self.rows}):
            for c in self.counts:
                taus = [next(r.tau for r in self.rows if (r.fold, r.count, r.beta) == (fold, c, b))
                        for b in self.betas]
                if any(y < x for x, y in zip(taus, taus[1:])):
                    bad.append((fold, c))
        return bad


def mean_user_tau(a: np.ndarray, b: np.ndarray) -> float:
    return statistics.fmean(kendall_tau(a[:, u], b[:, u]) for u in range(a.shape[1]))


def local_sparsity_experiment(config: ExperimentConfig, ws: Workspace | None = None) -> LocalResult:
    """Kendall tau between rankings on the original and the new-item-degraded training data.

    For each fold and count, ``degrade_items`` turns ``count`` popular items
    into near-new ones; each beta on the grid (alpha = total - beta) is
    ranked on both datasets and per-user tau is averaged over all users.
    """
    ws = ws or Workspace(config)
    rows = []
    for k in config.folds:
        ds = ws.fold(k)
        base = ws.base_model(k)
        original = {b: ws.rank(base, ds, config.grid_alpha(b), b, config.phi) for b in config.beta_grid}
        for count in config.new_item_counts:
            degraded, _ = degrade_items(ds, count, config.min_ratings, config.keep_fraction,
                                        derive_seed(config.seed, k, count))
            model = ws.model_for(degraded)
            for b in config.beta_grid:
                scores = ws.rank(model, degraded, config.grid_alpha(b), b, config.phi)
                rows.append(LocalRow(count, b, k, mean_user_tau(original[b], scores)))
    return LocalResult(tuple(rows), tuple(config.beta_grid), tuple(config.new_item_counts))


@dataclass(frozen=True)
class BenchmarkResult:
    batch_seconds: float
    sequential_seconds: float
    max_abs_diff: float
    repetitions: int
    users: int

    @property
    def ratio(self) -> float:
        return self.sequential_seconds / self.batch_seconds


def benchmark(config: ExperimentConfig, repetitions: int = 1, fold: int = 1,
              ws: Workspace | None = None) -> BenchmarkResult:
    """Time batch ranking of every user against one ``rank_user`` call per user."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    ws = ws or Workspace(config)
    ds = ws.fold(fold)
    model = ws.base_model(fold).with_params(alpha=config.alpha, phi=config.phi, betas=[config.beta])
    W = preference_matrix(ds)

    def batch():
        return rank_all(model, W, config.conv).scores

    def sequential():
        return np.column_stack([rank_user(model, W[:, u], config.conv).scores for u in range(ds.n)])

    diff = float(np.abs(batch() - sequential()).max())
    tb = ts = 0.0
    for _ in range(repetitions):
        t0 = time.perf_counter()
        batch()
        t1 = time.perf_counter()
        sequential()
        t2 = time.perf_counter()
        tb += t1 - t0
        ts += t2 - t1
    return BenchmarkResult(tb / repetitions, ts / repetitions, diff, repetitions, ds.n)


# CSV output

def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], metadata: dict[str, str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in metadata.items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _param(x: float) -> str:
    return "" if math.isnan(x) else f"{x:g}"


def cv_rows(result: CvResult) -> list[list[str]]:
    return [[s.fold, s.variant, _param(s.alpha), _param(s.beta), _param(s.phi),
             _fmt(100 * s.report.macro), _fmt(100 * s.report.micro)] for s in result.scores]


CV_HEADER = ["fold", "variant", "alpha", "beta", "phi", "macro_doa", "micro_doa"]
PAIRS_HEADER = ["fold", "variant", "user_id", "correct", "pairs", "doa"]


def write_cv(path, results: Sequence[CvResult], metadata: dict[str, str], pairs_path=None,
             datasets: dict[int, RatingsDataset] | None = None) -> None:
    write_csv(path, CV_HEADER, [r for res in results for r in cv_rows(res)], metadata)
    if pairs_path is not None:
        rows = []
        for res in results:
            for s in res.scores:
                ids = datasets[s.fold].user_ids
                for u in s.report.per_user:
                    rows.append([s.fold, s.variant, int(ids[u.user]), u.correct, u.pairs, repr(u.doa)])
        write_csv(pairs_path, PAIRS_HEADER, rows, metadata)


def write_sweep(path, sweep: Sequence[tuple[float, CvResult]], metadata: dict[str, str]) -> None:
    write_csv(path, ["phi", "macro_doa", "micro_doa", "macro_std", "micro_std"],
              [[f"{phi:g}", _fmt(r.macro_mean), _fmt(r.micro_mean), _fmt(r.macro_std), _fmt(r.micro_std)]
               for phi, r in sweep], metadata)


def write_sparsity(path, rows: Sequence[SparsityRow], metadata: dict[str, str]) -> None:
    write_csv(path, ["fraction", "variant", "fold", "train_size", "macro_doa", "micro_doa"],
              [[f"{r.fraction:g}", r.variant, r.fold, r.train_size,
                _fmt(100 * r.report.macro), _fmt(100 * r.report.micro)] for r in rows], metadata)


def write_local(path, result: LocalResult, metadata: dict[str, str], table_path=None) -> None:
    write_csv(path, ["count", "beta", "fold", "mean_kendall_tau"],
              [[r.count, f"{r.beta:g}", r.fold, _fmt(r.tau)] for r in result.rows], metadata)
    if table_path is not None:
        table = result.table()
        write_csv(table_path, ["count"] + [f"beta={b:g}" for b in result.betas],
                  [[c] + [_fmt(t) for t in table[c]] for c in result.counts], metadata)
