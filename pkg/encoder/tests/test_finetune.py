"""Example building, training behavior, checkpoint round trips."""

import numpy as np
import pytest
import torch

from kgencoder import (
    CheckpointError,
    CorpusError,
    DescriptionCorpus,
    FinetuneConfig,
    build_examples,
    encode_batch,
    finetune,
    load_checkpoint,
    majority_share,
    save_checkpoint,
)

FAST = FinetuneConfig(epochs=3, seed=1)


class TestMajorityShare:
    def test_counts(self):
        assert majority_share(["a", "a", "b"]) == 2 / 3
        assert majority_share([1, 1, 1, 1]) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(CorpusError):
            majority_share([])


class TestBuildExamples:
    def test_labels_and_relations_sorted(self, toy_corpus, toy_triplets):
        tokenizer, relations, id_lists, labels = build_examples(
            toy_corpus, toy_triplets, budget=64
        )
        assert relations == ["fears", "likes"]
        assert len(id_lists) == len(labels) == len(toy_triplets)
        assert set(labels) == {0, 1}
        assert tokenizer.size > 4

    def test_requires_two_classes(self, toy_corpus):
        with pytest.raises(CorpusError, match=">= 2 relation classes"):
            build_examples(toy_corpus, [("a0", "likes", "b0")], budget=64)

    def test_requires_triplets(self, toy_corpus):
        with pytest.raises(CorpusError, match="no training triplets"):
            build_examples(toy_corpus, [], budget=64)

    def test_missing_description_warns_and_tokenizes_name(self, toy_corpus):
        triplets = [("ghost", "likes", "a0"), ("a0", "fears", "b0")]
        with pytest.warns(UserWarning, match="ghost"):
            tokenizer, _, id_lists, _ = build_examples(toy_corpus, triplets, budget=64)
        assert "ghost" in tokenizer.vocab


class TestConfig:
    def test_validation_errors(self):
        with pytest.raises(CorpusError):
            FinetuneConfig(epochs=0).validate()
        with pytest.raises(CorpusError):
            FinetuneConfig(dim=30, heads=4).validate()
        with pytest.raises(CorpusError):
            FinetuneConfig(budget=1).validate()
        FinetuneConfig().validate()


class TestFinetune:
    def test_beats_majority_on_separable_corpus(self, toy_corpus, toy_triplets):
        labels = [r for _, r, _ in toy_triplets]
        _, history = finetune(toy_corpus, toy_triplets, FAST)
        assert history[-1]["train_accuracy"] > majority_share(labels)

    def test_history_shape_and_progress(self, toy_corpus, toy_triplets):
        seen = []
        _, history = finetune(toy_corpus, toy_triplets, FAST, progress=seen.append)
        assert [h["epoch"] for h in history] == [0, 1, 2]
        assert seen == history
        assert all(h["train_loss"] > 0 for h in history)

    def test_seed_reproducibility(self, toy_corpus, toy_triplets):
        _, first = finetune(toy_corpus, toy_triplets, FAST)
        _, second = finetune(toy_corpus, toy_triplets, FAST)
        assert first == second


class TestCheckpoint:
    def test_round_trip_preserves_encodings(self, tmp_path, toy_corpus, toy_triplets):
        ckpt, _ = finetune(toy_corpus, toy_triplets, FAST)
        path = tmp_path / "enc.kgenc"
        save_checkpoint(path, ckpt)
        model, tokenizer, relations, cfg = load_checkpoint(path)
        assert relations == ["fears", "likes"]
        seqs = [tokenizer.encode_single(toy_corpus.text_for("a0"), cfg.budget)]
        again, _, _, _ = load_checkpoint(path)
        np.testing.assert_array_equal(
            encode_batch(model, seqs), encode_batch(again, seqs)
        )

    def test_rejects_non_checkpoint_file(self, tmp_path):
        junk = tmp_path / "junk.kgenc"
        junk.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError, match="cannot read"):
            load_checkpoint(junk)

    def test_rejects_wrong_format_tag(self, tmp_path):
        path = tmp_path / "wrong.kgenc"
        torch.save({"format": "OTHER1"}, path)
        with pytest.raises(CheckpointError, match="not a KGENC1"):
            load_checkpoint(path)

    def test_rejects_missing_keys(self, tmp_path):
        path = tmp_path / "partial.kgenc"
        torch.save({"format": "KGENC1", "config": {}, "vocab": {}}, path)
        with pytest.raises(CheckpointError, match="missing keys"):
            load_checkpoint(path)

    def test_rejects_mismatched_weights(self, tmp_path, toy_corpus, toy_triplets):
        ckpt, _ = finetune(toy_corpus, toy_triplets, FAST)
        ckpt = dict(ckpt, config=dict(ckpt["config"], dim=64, ffn=128))
        path = tmp_path / "mismatch.kgenc"
        save_checkpoint(path, ckpt)
        with pytest.raises(CheckpointError, match="do not fit"):
            load_checkpoint(path)
