import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

MOVIELENS_FILES = ["u.data", "u.item"] + [f"u{k}.{s}" for k in range(1, 6) for s in ("base", "test")]


def _have(d):
    return all((d / f).is_file() for f in MOVIELENS_FILES)


@pytest.fixture(scope="session")
def movielens_dir():
    """The MovieLens 100K directory; fetched once through scripts/fetch_movielens.py if absent."""
    d = Path(os.environ.get("HIR_DATA", ROOT / "data" / "ml-100k"))
    if not _have(d):
        try:
            subprocess.run([sys.executable, str(ROOT / "scripts" / "fetch_movielens.py"), str(d)],
                           check=True, capture_output=True, timeout=600)
        except (subprocess.SubprocessError, OSError):
            pass
    if not _have(d):
        pytest.skip(f"MovieLens 100K not available at {d}")
    return d


GENRES = 19


def write_fake_movielens(d, n_users=40, n_items=30, seed=0):
    """A small directory in the MovieLens 100K layout, folds built the same way as the real ones."""
    rng = np.random.default_rng(seed)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for u in range(1, n_users + 1):
        items = rng.choice(n_items, size=rng.integers(8, n_items - 4), replace=False) + 1
        for v in items:
            lines.append((u, int(v), int(rng.integers(1, 6)), 880000000 + len(lines)))
    order = rng.permutation(len(lines))
    lines = [lines[i] for i in order]
    fmt = lambda rows: "".join("%d\t%d\t%d\t%d\n" % r for r in rows)
    (d / "u.data").write_text(fmt(lines))
    with open(d / "u.item", "w", encoding="latin-1") as fh:
        for v in range(1, n_items + 1):
            flags = ["0"] * GENRES
            if v % 7:
                for g in rng.choice(GENRES - 1, size=rng.integers(1, 3), replace=False):
                    flags[g + 1] = "1"
            fh.write("|".join([str(v), f"Movie \xe9{v} (1995)", "01-Jan-1995", "", "http://x"] + flags) + "\n")
    size = len(lines) // 5
    key = lambda r: (r[0], r[1])
    for k in range(1, 6):
        lo, hi = (k - 1) * size, k * size if k < 5 else len(lines)
        (d / f"u{k}.test").write_text(fmt(sorted(lines[lo:hi], key=key)))
        (d / f"u{k}.base").write_text(fmt(sorted(lines[:lo] + lines[hi:], key=key)))
    return d


@pytest.fixture(scope="session")
def fake_movielens(tmp_path_factory):
    return write_fake_movielens(tmp_path_factory.mktemp("ml-fake"))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
