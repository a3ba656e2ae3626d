"""Command-line entry point: ``hir <subcommand> [flags]``.

Exit status is 0 on success, 1 on a runtime failure (missing files,
unparsable data) and 2 on a usage error, including out-of-range model
parameters.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import load_movielens_fold, parse_ratings
from .errors import HirError
from .experiments import (
    ExperimentConfig, Workspace, benchmark, cross_validate, default_phi_grid, local_sparsity_experiment,
    phi_sweep, sparsity_experiment, write_cv, write_local, write_sparsity, write_sweep,
)
from .model import preference_matrix
from .ranker import ConvergenceParams, rank_all, top_n, write_rankings

DEFAULT_DATA = os.environ.get("HIR_DATA", "data/ml-100k")


def _unit_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = _unit_float(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("counts must be >= 1")
    return values


def _fold(text: str) -> int:
    value = _positive_int(text)
    if value > 5:
        raise argparse.ArgumentTypeError("fold must be 1..5")
    return value


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _data_args(p: argparse.ArgumentParser, fold: bool = False) -> None:
    p.add_argument("--data", type=Path, default=Path(DEFAULT_DATA),
                   help="unpacked MovieLens 100K directory (env HIR_DATA overrides the default)")
    if fold:
        p.add_argument("--fold", type=_fold, default=1, help="predefined split u1..u5")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=_unit_float, default=0.8, help="weight of the direct component C")
    p.add_argument("--beta", type=_unit_float, default=0.1, help="weight of the genre proximity component D")
    p.add_argument("--phi", type=_unit_float, default=0.5, help="co-occurrence share of C (1 - phi goes to adjusted cosine)")
    p.add_argument("--tol", type=_positive_float, default="1e-8", help="L1 residual tolerance")
    p.add_argument("--maxit", type=_positive_int, default=100, help="maximum power iterations")
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1, help="worker threads for ranking")


def _variant_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=("hir", "itemrank", "simrank", "maxf"), default="hir",
                   help="itemrank/simrank use alpha+beta on co-occurrence/adjusted cosine alone")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hir", description="Hierarchical item ranking for collaborative filtering.",
                                     formatter_class=_Formatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="validate a dataset directory and print counts", formatter_class=_Formatter)
    _data_args(p)

    p = sub.add_parser("rank", help="rank items for one user or all users of a fold", formatter_class=_Formatter)
    _data_args(p, fold=True)
    _model_args(p)
    p.add_argument("--user", type=int, help="original user id (default: every user)")
    p.add_argument("--top", type=_positive_int, default=10, help="items per user, training items excluded")
    p.add_argument("--out", type=Path, help="write a user_id,item_id,score,rank CSV here instead of stdout")

    p = sub.add_parser("eval", help="macro/micro DOA on one fold", formatter_class=_Formatter)
    _data_args(p, fold=True)
    _model_args(p)
    _variant_arg(p)
    p.add_argument("--out", type=Path, help="metric CSV")

    p = sub.add_parser("cv", help="5-fold cross-validated DOA", formatter_class=_Formatter)
    _data_args(p)
    _model_args(p)
    _variant_arg(p)
    p.add_argument("--out", type=Path, help="per-fold metric CSV")
    p.add_argument("--pairs-out", type=Path, help="per-user correct/pairs CSV")

    p = sub.add_parser("experiment", help="sparsity experiments", formatter_class=_Formatter)
    exp = p.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    q = exp.add_parser("sparsity", help="global sparsity: subsampled training sets", formatter_class=_Formatter)
    _data_args(q)
    _model_args(q)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--fractions", type=_float_list, default=[0.8, 0.6, 0.4], help="kept training fractions")
    q.add_argument("--out", type=Path, required=True)
    q = exp.add_parser("local", help="local sparsity: Kendall tau under new-item degradation",
                       formatter_class=_Formatter)
    _data_args(q)
    _model_args(q)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--betas", type=_float_list, default=[0.0, 0.05, 0.1, 0.2, 0.3, 0.4],
                   help="beta grid; alpha = total - beta")
    q.add_argument("--total", type=_unit_float, default=0.9, help="alpha + beta along the grid")
    q.add_argument("--counts", type=_int_list, default=[100, 200, 300], help="numbers of degraded items")
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--table-out", type=Path, help="fold-averaged count x beta table")

    p = sub.add_parser("sweep", help="parameter sweeps", formatter_class=_Formatter)
    sw = p.add_subparsers(dest="sweep", required=True, metavar="PARAM")
    q = sw.add_parser("phi", help="cross-validated DOA over a phi grid", formatter_class=_Formatter)
    _data_args(q)
    _model_args(q)
    q.add_argument("--grid", type=_float_list, default=default_phi_grid(), help="phi values")
    q.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("bench", help="batch versus sequential ranking time", formatter_class=_Formatter)
    _data_args(p, fold=True)
    _model_args(p)
    p.add_argument("--repetitions", type=_positive_int, default=1)
    return parser


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if hasattr(args, "alpha"):
        if args.phi > 1:
            parser.error("phi must be in [0, 1]")
        if args.alpha + args.beta >= 1:
            parser.error("alpha + beta must be < 1")
    if getattr(args, "betas", None) is not None:
        if any(b < 0 or args.total - b < 0 for b in args.betas) or args.total >= 1:
            parser.error("every grid point needs 0 <= beta <= total < 1")
    if getattr(args, "grid", None) is not None and any(not 0 <= g <= 1 for g in args.grid):
        parser.error("phi grid values must lie in [0, 1]")
    if getattr(args, "fractions", None) is not None and any(not 0 < f <= 1 for f in args.fractions):
        parser.error("fractions must lie in (0, 1]")


def _config(args: argparse.Namespace, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        data_dir=args.data, alpha=args.alpha, beta=args.beta, phi=args.phi,
        conv=ConvergenceParams(args.tol, args.maxit), jobs=args.jobs, **extra,
    )


def _cmd_ingest(args) -> None:
    data = args.data
    full = parse_ratings(data / "u.data")
    users = {t.user for t in full}
    items = {t.item for t in full}
    print(f"u.data: ratings={len(full)} users={len(users)} items={len(items)}")
    ws = Workspace(ExperimentConfig(data_dir=data))
    print(f"u.item: items={ws.genres.m} blocks={ws.genres.block_count}")
    for k in range(1, 6):
        ds = load_movielens_fold(data, k)
        print(f"u{k}: train={len(ds.train)} test={len(ds.test)} users={ds.n}")


def _cmd_rank(args) -> None:
    cfg = _config(args, folds=(args.fold,))
    ws = Workspace(cfg)
    ds = ws.fold(args.fold)
    if args.user is None:
        users = list(range(ds.n))
    else:
        if args.user not in ds.user_index:
            raise HirError(f"user {args.user} does not appear in fold {args.fold}")
        users = [ds.user_index[args.user]]
    model = ws.base_model(args.fold).with_params(alpha=args.alpha, phi=args.phi, betas=[args.beta])
    ranks = rank_all(model, preference_matrix(ds, users), cfg.conv, cfg.jobs)
    rows = [(u, top_n(ranks.scores[:, c], ds.user_train_items[u], args.top), ranks.scores[:, c])
            for c, u in enumerate(users)]
    if args.out:
        with open(args.out, "w", newline="", encoding="ascii") as fh:
            write_rankings(fh, rows, ds.user_ids, ds.item_ids)
    else:
        write_rankings(sys.stdout, rows, ds.user_ids, ds.item_ids, header=False)


def _cmd_eval(args) -> None:
    cfg = _config(args, folds=(args.fold,))
    ws = Workspace(cfg)
    res = cross_validate(cfg, args.variant, ws)
    report = res.scores[0].report
    print(f"macro_doa={100 * report.macro:.4f} micro_doa={100 * report.micro:.4f}")
    if args.out:
        write_cv(args.out, [res], cfg.metadata())


def _cmd_cv(args) -> None:
    cfg = _config(args)
    ws = Workspace(cfg)
    res = cross_validate(cfg, args.variant, ws)
    for s in res.scores:
        print(f"fold {s.fold}: macro_doa={100 * s.report.macro:.4f} micro_doa={100 * s.report.micro:.4f}")
    print(res.summary())
    if args.out or args.pairs_out:
        datasets = {k: ws.fold(k) for k in cfg.folds}
        write_cv(args.out or os.devnull, [res], cfg.metadata(), args.pairs_out, datasets)


def _cmd_experiment(args) -> None:
    if args.experiment == "sparsity":
        cfg = _config(args, seed=args.seed, fractions=tuple(args.fractions))
        rows = sparsity_experiment(cfg)
        write_sparsity(args.out, rows, cfg.metadata())
        for r in rows:
            print(f"fraction={r.fraction:g} fold={r.fold} {r.variant}: macro_doa={100 * r.report.macro:.4f}")
        return
    counts = tuple(args.counts)
    cfg = _config(args, seed=args.seed, beta_grid=tuple(args.betas), grid_total=args.total,
                  new_item_counts=counts)
    result = local_sparsity_experiment(cfg)
    write_local(args.out, result, cfg.metadata(), args.table_out)
    print("count " + " ".join(f"beta={b:g}" for b in result.betas))
    for c, taus in result.table().items():
        print(f"{c} " + " ".join(f"{t:.4f}" for t in taus))
    bad = result.monotone_violations()
    if bad:
        print("tau not monotone in beta for (fold, count): " + ", ".join(map(str, bad)))


def _cmd_sweep(args) -> None:
    cfg = _config(args)
    sweep = phi_sweep(cfg, args.grid)
    write_sweep(args.out, sweep, cfg.metadata())
    for phi, res in sweep:
        print(f"phi={phi:g} {res.summary()}")


def _cmd_bench(args) -> None:
    cfg = _config(args, folds=(args.fold,))
    r = benchmark(cfg, args.repetitions, args.fold)
    print(f"users={r.users} batch={r.batch_seconds:.3f}s sequential={r.sequential_seconds:.3f}s "
          f"ratio={r.ratio:.2f} max_abs_diff={r.max_abs_diff:.3g}")


COMMANDS = {
    "ingest": _cmd_ingest, "rank": _cmd_rank, "eval": _cmd_eval, "cv": _cmd_cv,
    "experiment": _cmd_experiment, "sweep": _cmd_sweep, "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        COMMANDS[args.command](args)
    except (HirError, OSError, ValueError) as exc:
        print(f"hir: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
