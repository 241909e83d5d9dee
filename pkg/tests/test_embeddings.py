import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptrank.embeddings import cosine, load_embeddings, phrase_vector
from conceptrank.errors import CoverageError, FormatError

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _write(tmp_path, text, name="emb.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoad:
    def test_readback(self, tmp_path):
        table = load_embeddings(_write(tmp_path, "dog 1 0 0\nshow 0 1 0\n"))
        assert table.dimension == 3
        assert len(table) == 2
        np.testing.assert_array_equal(table.get("dog"), [1.0, 0.0, 0.0])

    def test_inconsistent_arity(self, tmp_path):
        with pytest.raises(FormatError, match=":2:"):
            load_embeddings(_write(tmp_path, "dog 1 0 0\nshow 0 1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(FormatError, match="no entries"):
            load_embeddings(_write(tmp_path, ""))

    def test_zero_vector_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="zero vector"):
            load_embeddings(_write(tmp_path, "dog 0 0 0\n"))

    def test_bad_float(self, tmp_path):
        with pytest.raises(FormatError, match="bad float"):
            load_embeddings(_write(tmp_path, "dog 1 x 0\n"))

    def test_duplicates_last_wins(self, tmp_path):
        table = load_embeddings(_write(tmp_path, "dog 1 0\ndog 0 2\n"))
        assert table.duplicate_count == 1
        np.testing.assert_array_equal(table.get("dog"), [0.0, 2.0])

    def test_tokens_lowercased(self, tmp_path):
        table = load_embeddings(_write(tmp_path, "DOG 1 0\n"))
        assert "dog" in table

    def test_scientific_notation(self, tmp_path):
        table = load_embeddings(_write(tmp_path, "dog 1e-2 2.5E3\n"))
        np.testing.assert_allclose(table.get("dog"), [0.01, 2500.0])


class TestPhrase:
    def test_two_tokens(self, tiny_table):
        pv = phrase_vector(["dog", "show"], tiny_table)
        np.testing.assert_allclose(pv.vector, [INV_SQRT2, INV_SQRT2, 0.0], atol=1e-12)
        assert pv.covered_tokens == 2

    def test_single_token_identity(self, tiny_table):
        pv = phrase_vector(["dog"], tiny_table)
        np.testing.assert_allclose(pv.vector, [1.0, 0.0, 0.0], atol=1e-12)
        assert pv.covered_tokens == 1

    def test_fully_oov(self, tiny_table):
        with pytest.raises(CoverageError):
            phrase_vector(["qwertyuiop"], tiny_table)

    def test_oov_tokens_skipped(self, tiny_table):
        pv = phrase_vector(["dog", "zzz"], tiny_table)
        assert pv.covered_tokens == 1


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == 0.0

    def test_derived_value(self):
        c = cosine(np.array([1.0, 0, 0]), np.array([INV_SQRT2, INV_SQRT2, 0]))
        assert abs(c - INV_SQRT2) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine(np.zeros(3), np.ones(3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.ones(3), np.ones(4))


_finite_vec = st.lists(
    st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=2, max_size=6
).filter(lambda v: any(abs(x) > 1e-6 for x in v))


@given(_finite_vec, _finite_vec)
@settings(max_examples=200, deadline=None)
def test_cosine_symmetric(u, v):
    if len(u) != len(v):
        v = (v * len(u))[: len(u)]
        if not any(abs(x) > 1e-6 for x in v):
            return
    a = np.array(u)
    b = np.array(v)
    assert cosine(a, b) == cosine(b, a)


@given(_finite_vec, st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_cosine_scale_invariant(u, alpha):
    a = np.array(u)
    b = np.array(u[::-1])
    if not np.any(np.abs(b) > 1e-6):
        return
    assert abs(cosine(alpha * a, b) - cosine(a, b)) < 1e-12


def test_phrase_order_invariant(tiny_table):
    a = phrase_vector(["dog", "show", "parade"], tiny_table).vector
    b = phrase_vector(["parade", "dog", "show"], tiny_table).vector
    np.testing.assert_allclose(a, b, atol=1e-12)
