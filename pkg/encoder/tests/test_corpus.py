"""Corpus and triplet file parsing, name fallback, error taxonomy."""

import pytest

from kgencoder import CorpusError, load_corpus, load_triplets


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCorpus:
    def test_round_trip(self, tmp_path):
        p = write(tmp_path / "d.tsv", "a\tred dog\nb\tblue cat\n")
        corpus = load_corpus(p)
        assert corpus.names == ["a", "b"]
        assert corpus.text_for("a") == "red dog"
        assert "b" in corpus and len(corpus) == 2

    def test_tab_inside_text_preserved(self, tmp_path):
        """Only the first tab separates; later tabs belong to the text."""
        p = write(tmp_path / "d.tsv", "a\tleft\tright\n")
        assert load_corpus(p).text_for("a") == "left\tright"

    def test_blank_lines_skipped(self, tmp_path):
        p = write(tmp_path / "d.tsv", "a\tx\n\nb\ty\n")
        assert load_corpus(p).names == ["a", "b"]

    def test_missing_tab_rejected(self, tmp_path):
        p = write(tmp_path / "d.tsv", "no separator here\n")
        with pytest.raises(CorpusError, match="entity<TAB>text"):
            load_corpus(p)

    def test_duplicate_entity_rejected(self, tmp_path):
        p = write(tmp_path / "d.tsv", "a\tx\na\ty\n")
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(p)

    def test_empty_name_rejected(self, tmp_path):
        p = write(tmp_path / "d.tsv", "\tjust text\n")
        with pytest.raises(CorpusError, match="empty entity name"):
            load_corpus(p)


class TestFallback:
    def test_unknown_entity_falls_back_to_name(self, toy_corpus):
        with pytest.warns(UserWarning, match="ghost"):
            assert toy_corpus.text_for("ghost") == "ghost"

    def test_warns_once_per_name(self, toy_corpus):
        with pytest.warns(UserWarning):
            toy_corpus.text_for("ghost")
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert toy_corpus.text_for("ghost") == "ghost"

    def test_known_entity_never_warns(self, toy_corpus):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert "a0" in toy_corpus.text_for("a0")


class TestLoadTriplets:
    def test_round_trip(self, tmp_path):
        p = write(tmp_path / "t.txt", "a\tr1\tb\nb\tr2\tc\n")
        assert load_triplets(p) == [("a", "r1", "b"), ("b", "r2", "c")]

    def test_blank_lines_skipped(self, tmp_path):
        p = write(tmp_path / "t.txt", "a\tr\tb\n\n")
        assert len(load_triplets(p)) == 1

    def test_wrong_field_count_rejected(self, tmp_path):
        p = write(tmp_path / "t.txt", "a\tr\n")
        with pytest.raises(CorpusError, match="3 tab-separated"):
            load_triplets(p)
