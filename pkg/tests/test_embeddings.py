import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_ds
from xlirony.embeddings import (EmbeddingTable, coverage, load_embeddings, lookup, normalize,
                                save_embeddings)
from xlirony.errors import EmbeddingError


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "e.vec"
    p.write_text("2 3\ncat 1 0 0\ndog 0 1 0\n", encoding="utf-8")
    return p


def test_load_and_lookup(small):
    t = load_embeddings(small)
    assert (t.dim, len(t)) == (3, 2)
    assert lookup(t, "cat").tolist() == [1, 0, 0]
    assert lookup(t, "CAT").tolist() == [1, 0, 0]
    assert lookup(t, "fish") is None


def test_wrong_component_count(tmp_path):
    p = tmp_path / "e.vec"
    p.write_text("2 3\ncat 1 0 0\nbird 1 0\n", encoding="utf-8")
    with pytest.raises(EmbeddingError, match=r":3: word 'bird'"):
        load_embeddings(p)


@pytest.mark.parametrize("content", ["3\ncat 1 0 0\n", "x 3\n", "1 0\n", "1 2\ncat 1 zz\n"])
def test_bad_files(tmp_path, content):
    p = tmp_path / "e.vec"
    p.write_text(content, encoding="utf-8")
    with pytest.raises(EmbeddingError):
        load_embeddings(p)


def test_duplicates_and_count_mismatch(tmp_path, caplog):
    p = tmp_path / "e.vec"
    p.write_text("5 2\na 1 0\na 0 1\nb 1 1\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        t = load_embeddings(p)
    assert t.words == ("a", "b") and lookup(t, "a").tolist() == [1, 0]
    assert "repeated" in caplog.text and "declares 5" in caplog.text


def test_max_vocab(small):
    assert load_embeddings(small, max_vocab=1).words == ("cat",)


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = EmbeddingTable(tuple(f"w{i}" for i in range(30)), rng.normal(size=(30, 7)))
    save_embeddings(t, tmp_path / "r.vec")
    back = load_embeddings(tmp_path / "r.vec")
    assert back == t
    assert np.array_equal(back.matrix, t.matrix)


def test_table_is_immutable(small):
    t = load_embeddings(small)
    with pytest.raises(ValueError):
        t.matrix[0, 0] = 5


def test_normalize():
    t = normalize(EmbeddingTable(("a",), np.array([[3.0, 4.0]])))
    assert np.allclose(t.matrix, [[0.6, 0.8]], atol=1e-15) and t.normalized
    again = normalize(t)
    assert np.max(np.abs(again.matrix - t.matrix)) <= 1e-12
    with pytest.raises(EmbeddingError, match="'z'"):
        normalize(EmbeddingTable(("a", "z"), np.array([[1.0, 0.0], [0.0, 0.0]])))


def _table(words, dim=2):
    return EmbeddingTable(tuple(words), np.ones((len(words), dim)))


def test_coverage_counting():
    ds = make_ds([("a a b", "ironic"), ("c", "non_ironic")])
    rep = coverage(ds, _table(["a", "b"]))
    assert rep.token_coverage == pytest.approx(3 / 4)
    assert rep.type_coverage == pytest.approx(2 / 3)
    assert rep.oov_types == [("c", 1)]
    full = coverage(ds, _table(["a", "b", "c"]))
    assert (full.token_coverage, full.type_coverage) == (1.0, 1.0)


def test_coverage_ignores_punctuation_and_case():
    ds = make_ds([("Hello !! :) hello", "ironic")])
    rep = coverage(ds, _table(["hello"]))
    assert (rep.n_tokens, rep.n_types, rep.token_coverage) == (2, 1, 1.0)


def test_coverage_arabic_oov_list():
    ds = make_ds([("الحكومة قررت رفع الأسعار مرة أخرى", "ironic")], "ar")
    rep = coverage(ds, _table(["الحكومة", "رفع", "مرة"]))
    assert sorted(w for w, _ in rep.oov_types) == sorted(["قررت", "الأسعار", "أخرى"])
    assert rep.type_coverage == pytest.approx(0.5)


def test_coverage_empty_dataset():
    with pytest.raises(EmbeddingError):
        coverage(make_ds([]), _table(["a"]))


_vocab = st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=30)


@settings(max_examples=100, deadline=None)
@given(_vocab, st.sets(st.sampled_from("abcdefgh")), st.sets(st.sampled_from("abcdefgh")))
def test_coverage_monotone(tokens, base, extra):
    ds = make_ds([(" ".join(tokens), "ironic")])
    a = coverage(ds, _table(sorted(base)))
    b = coverage(ds, _table(sorted(base | extra)))
    assert b.token_coverage >= a.token_coverage
    assert b.type_coverage >= a.type_coverage
