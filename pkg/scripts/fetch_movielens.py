#!/usr/bin/env python3
"""Rebuild the MovieLens 100K directory (u.data, u.item, u1..u5 folds).

GroupLens does not allow redistribution of the dataset, so it is not
checked into this repository. The pytorch-widedeep wheel on PyPI ships
the ratings table (in the original ``u.data`` line order) and the full
24-column item table; this script pulls that wheel with ``pip download``
and writes the files back out in the original tab/pipe-separated layout.

The five predefined folds are regenerated exactly the way the dataset's
own ``mku.sh`` does it: fold ``k`` tests on lines ``20000*(k-1)+1 ..
20000*k`` of ``u.data`` and trains on the rest, both sorted by
``(user, item)``.

Usage::

    python scripts/fetch_movielens.py data/ml-100k
"""
import argparse
import io
import math
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

WHEEL = "pytorch-widedeep==1.7.0"
RATINGS_MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"
ITEMS_MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_items.parquet.brotli"

FOLD_SIZE = 20000
N_RATINGS = 100000
FIRST_LINE = "196\t242\t3\t881250949"


def _download_wheel(workdir):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", WHEEL, "-d", str(workdir)],
        check=True,
    )
    wheels = sorted(Path(workdir).glob("pytorch_widedeep-*.whl"))
    if not wheels:
        raise RuntimeError("pip download did not produce a pytorch-widedeep wheel")
    return wheels[0]


def _field(value):
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return str(value)


def write_dataset(wheel_path, out_dir):
    import pandas as pd

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel_path) as zf:
        ratings = pd.read_parquet(io.BytesIO(zf.read(RATINGS_MEMBER)))
        items = pd.read_parquet(io.BytesIO(zf.read(ITEMS_MEMBER)))

    rows = [tuple(int(v) for v in r) for r in ratings.itertuples(index=False)]
    if len(rows) != N_RATINGS:
        raise RuntimeError(f"expected {N_RATINGS} ratings, got {len(rows)}")
    lines = ["%d\t%d\t%d\t%d\n" % r for r in rows]
    if lines[0].rstrip("\n") != FIRST_LINE:
        raise RuntimeError("ratings are not in the original u.data order")
    (out_dir / "u.data").write_text("".join(lines))

    with open(out_dir / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        for rec in items.itertuples(index=False):
            fh.write("|".join(_field(v) for v in rec) + "\n")

    key = lambda r: (r[0], r[1])
    for k in range(1, 6):
        lo, hi = (k - 1) * FOLD_SIZE, k * FOLD_SIZE
        test = sorted(rows[lo:hi], key=key)
        base = sorted(rows[:lo] + rows[hi:], key=key)
        (out_dir / f"u{k}.test").write_text("".join("%d\t%d\t%d\t%d\n" % r for r in test))
        (out_dir / f"u{k}.base").write_text("".join("%d\t%d\t%d\t%d\n" % r for r in base))
    return out_dir


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", nargs="?", default="data/ml-100k")
    parser.add_argument("--wheel", help="use an already downloaded pytorch-widedeep wheel")
    args = parser.parse_args(argv)
    if args.wheel:
        write_dataset(args.wheel, args.out_dir)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            write_dataset(_download_wheel(tmp), args.out_dir)
    print(f"wrote MovieLens 100K to {args.out_dir}")


if __name__ == "__main__":
    main()
