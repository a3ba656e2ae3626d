import numpy as np
import pytest
from hypothesis import given, strategies as st

from hir.errors import ParseError, ValidationError
from hir.itemspace import Decomposition, ncd_factors, parse_block_file, parse_item_blocks, proximal_set

from oracles import brute_ncd, random_decomposition, worked_example


def test_worked_example_factors():
    f = ncd_factors(worked_example())
    X = [[1, 0, 0], [0.5, 0.5, 0], [0, 0, 1], [0.5, 0.5, 0], [0, 1, 0], [0.5, 0, 0.5]]
    Y = [[0.25, 0.25, 0, 0.25, 0, 0.25], [0, 1 / 3, 0, 1 / 3, 1 / 3, 0], [0, 0, 0.5, 0, 0, 0.5]]
    assert np.array_equal(f.X.toarray(), np.array(X))
    assert np.array_equal(f.Y.toarray(), np.array(Y))
    D = f.materialize()
    assert D[1, 4] == pytest.approx(1 / 6, abs=1e-15)
    assert np.allclose(D.sum(axis=1), 1, atol=1e-15)


def test_worked_example_proximal_set():
    dec = worked_example()
    # the union of the two blocks holding v2 also holds v4
    assert proximal_set(dec, 1).tolist() == [0, 1, 3, 4, 5]
    assert dec.block_counts.tolist() == [1, 2, 1, 2, 1, 2]


def test_proximal_set_singleton_and_range():
    dec = Decomposition(3, (np.array([0]), np.array([1, 2])), ("a", "b"))
    assert proximal_set(dec, 0).tolist() == [0]
    with pytest.raises(ValueError):
        proximal_set(dec, 3)
    with pytest.raises(ValueError):
        proximal_set(dec, -1)


@pytest.mark.parametrize("blocks,msg", [
    ((np.array([0]),), "belong to no block"),
    ((np.array([0, 1]), np.array([], dtype=int)), "empty"),
    ((np.array([0, 0, 1]),), "twice"),
    ((np.array([0, 2]),), "out of range"),
])
def test_decomposition_invariants(blocks, msg):
    with pytest.raises(ValidationError, match=msg):
        Decomposition(2, blocks, tuple(f"b{i}" for i in range(len(blocks))))


@given(st.integers(0, 2**32), st.integers(1, 30), st.integers(1, 6))
def test_factors_match_brute_force(seed, m, k):
    dec = random_decomposition(np.random.default_rng(seed), m, k)
    f = ncd_factors(dec)
    D = f.materialize()
    ref = brute_ncd(dec)
    assert np.max(np.abs(D - np.array(ref, dtype=float))) <= 1e-15
    assert f.X.nnz == f.Y.nnz == int(dec.block_counts.sum()) == sum(len(b) for b in dec.block_members)
    X = f.X.toarray()
    for v in range(m):
        row = X[v][X[v] > 0]
        assert np.all(row == 1 / dec.block_counts[v])
        # support of row v of D is the proximal set
        assert np.flatnonzero(D[v]).tolist() == proximal_set(dec, v).tolist()
        assert v in proximal_set(dec, v)


@given(st.integers(0, 2**32), st.integers(2, 20), st.integers(1, 5))
def test_factors_permutation_equivariant(seed, m, k):
    rng = np.random.default_rng(seed)
    dec = random_decomposition(rng, m, k)
    perm = rng.permutation(m)
    f, g = ncd_factors(dec), ncd_factors(dec.permuted(perm))
    X, Y = f.X.toarray(), f.Y.toarray()
    Xp, Yp = np.zeros_like(X), np.zeros_like(Y)
    Xp[perm] = X
    Yp[:, perm] = Y
    assert np.array_equal(g.X.toarray(), Xp)
    assert np.array_equal(g.Y.toarray(), Yp)


def test_materialize_refuses_large_instances():
    dec = Decomposition(51, (np.arange(51),), ("all",))
    with pytest.raises(ValueError):
        ncd_factors(dec).materialize()


def item_line(v, flags, title="Toy Story (1995)"):
    return "|".join([str(v), title, "01-Jan-1995", "", "http://x"] + [str(f) for f in flags]) + "\n"


def test_parse_item_blocks(tmp_path):
    flags = [[0] * 19 for _ in range(3)]
    flags[0][1] = flags[0][16] = 1  # Action, Thriller
    flags[2][8] = 1
    p = tmp_path / "u.item"
    p.write_bytes("".join(item_line(v + 1, f, "Caf\xe9") for v, f in enumerate(flags)).encode("latin-1"))
    dec = parse_item_blocks(p)
    assert dec.block_counts.tolist() == [2, 1, 1]
    labels = {dec.labels[k] for k in dec.item_blocks[0]}
    assert labels == {"Action", "Thriller"}
    assert [dec.labels[k] for k in dec.item_blocks[1]] == ["unknown"]


@pytest.mark.parametrize("line,msg", [
    (item_line(2, [0] * 18), "expected 24"),
    (item_line(2, [2] + [0] * 18), "0 or 1"),
    (item_line(5, [1] + [0] * 18), "out of sequence"),
])
def test_parse_item_blocks_errors(tmp_path, line, msg):
    p = tmp_path / "u.item"
    p.write_text(item_line(1, [1] + [0] * 18) + line, encoding="latin-1")
    with pytest.raises(ParseError, match=msg) as exc:
        parse_item_blocks(p)
    assert exc.value.lineno == 2


def test_parse_block_file(tmp_path):
    p = tmp_path / "blocks.tsv"
    p.write_text("10\tred\n20\tred\n20\tblue\n30\tblue\n")
    dec = parse_block_file(p, {10: 0, 20: 1, 30: 2}, 3)
    assert dec.labels == ("red", "blue")
    assert dec.block_counts.tolist() == [1, 2, 1]
    p.write_text("10\tred\n99\tred\n")
    with pytest.raises(ParseError, match="unknown item"):
        parse_block_file(p, {10: 0}, 1)


@pytest.mark.dataset
def test_movielens_genres(movielens_dir):
    dec = parse_item_blocks(movielens_dir / "u.item")
    assert (dec.m, dec.block_count) == (1682, 19)
    assert dec.labels[0] == "unknown"
    assert dec.block_counts.min() >= 1
