import numpy as np
import pytest

from symgraph.embeddings import (EmbeddingTable, embed_phrase, load_embeddings,
                                 normalize_token)
from symgraph.errors import EmbeddingParseError


def write_emb(tmp_path, lines):
    path = tmp_path / "vectors.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestNormalizeToken:
    def test_basic(self):
        assert normalize_token("  Car ") == "car"
        assert normalize_token("part_of") == "part of"
        assert normalize_token("red   car") == "red car"


class TestLoadEmbeddings:
    def test_basic_entry(self, tmp_path):
        vec = " ".join(str(0.1 * i) for i in range(300))
        table = load_embeddings(write_emb(tmp_path, [f"cat {vec}"]), dim=300)
        assert "cat" in table
        assert table.lookup_word("cat").shape == (300,)

    def test_wrong_float_count_names_line(self, tmp_path):
        good = "cat " + " ".join(["0.0"] * 300)
        bad = "dog " + " ".join(["0.0"] * 299)
        path = write_emb(tmp_path, [good, bad])
        with pytest.raises(EmbeddingParseError, match=":2"):
            load_embeddings(path, dim=300)

    def test_lookup_is_case_insensitive(self, tmp_path):
        path = write_emb(tmp_path, ["Cat 1.0 2.0 3.0"])
        table = load_embeddings(path, dim=3)
        np.testing.assert_array_equal(table.lookup_word("cat"), [1.0, 2.0, 3.0])

    def test_duplicates_keep_first(self, tmp_path):
        path = write_emb(tmp_path, ["cat 1.0 2.0", "cat 9.0 9.0"])
        table = load_embeddings(path, dim=2)
        np.testing.assert_array_equal(table.lookup_word("cat"), [1.0, 2.0])

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(EmbeddingParseError):
            load_embeddings(path, dim=3)

    def test_non_numeric_rejected(self, tmp_path):
        path = write_emb(tmp_path, ["cat a b c"])
        with pytest.raises(EmbeddingParseError, match=":1"):
            load_embeddings(path, dim=3)


class TestEmbedPhrase:
    @pytest.fixture
    def table(self):
        return EmbeddingTable(3, {
            "cat": np.array([1.0, 2.0, 3.0]),
            "red": np.array([1.0, 0.0, 0.0]),
            "car": np.array([0.0, 2.0, 0.0]),
        })

    def test_known_token(self, table):
        np.testing.assert_array_equal(embed_phrase(table, "cat").data, [1.0, 2.0, 3.0])

    def test_fully_oov_is_zero(self, table):
        np.testing.assert_array_equal(embed_phrase(table, "zqxjk").data, [0.0] * 3)

    def test_phrase_mean(self, table):
        np.testing.assert_array_equal(embed_phrase(table, "red car").data,
                                      [0.5, 1.0, 0.0])

    def test_underscore_split(self, table):
        np.testing.assert_array_equal(embed_phrase(table, "red_car").data,
                                      [0.5, 1.0, 0.0])

    def test_partial_oov_averages_found_words_only(self, table):
        np.testing.assert_array_equal(embed_phrase(table, "shiny red").data,
                                      [1.0, 0.0, 0.0])

    def test_order_insensitive(self, table):
        a = embed_phrase(table, "red car").data
        b = embed_phrase(table, "car red").data
        assert np.array_equal(a, b)

    def test_output_length_always_dim(self, table):
        for phrase in ("cat", "zq", "", "red cat car zz"):
            assert embed_phrase(table, phrase).data.shape == (3,)
