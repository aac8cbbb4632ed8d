"""Word-level tokenizer with the special tokens the encoder expects.

Texts are lowercased and split on whitespace; the vocabulary is built
from the corpus in first-appearance order so it is deterministic for a
given corpus. A paired input is laid out as [CLS] head-tokens [SEP]
tail-tokens; a single-entity input as [CLS] tokens. Both respect a
fixed token budget: each description is capped individually, and an
over-long pair is balanced by trimming the longer side first.
"""

from __future__ import annotations

from dataclasses import dataclass

PAD, UNK, CLS, SEP = 0, 1, 2, 3
SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")
BUDGET = 512


def words(text: str) -> list[str]:
    return text.lower().split()


@dataclass
class WordTokenizer:
    """Frozen word -> id mapping; unseen words map to UNK."""

    vocab: dict[str, int]

    @classmethod
    def build(cls, texts) -> "WordTokenizer":
        vocab = {tok: i for i, tok in enumerate(SPECIALS)}
        for text in texts:
            for w in words(text):
                if w not in vocab:
                    vocab[w] = len(vocab)
        return cls(vocab=vocab)

    @property
    def size(self) -> int:
        return len(self.vocab)

    def ids(self, text: str, budget: int = BUDGET) -> list[int]:
        return [self.vocab.get(w, UNK) for w in words(text)[:budget]]

    def encode_single(self, text: str, budget: int = BUDGET) -> list[int]:
        return [CLS] + self.ids(text, budget)[: budget - 1]

    def encode_pair(self, head_text: str, tail_text: str, budget: int = BUDGET) -> list[int]:
        head = self.ids(head_text, budget)
        tail = self.ids(tail_text, budget)
        over = len(head) + len(tail) + 2 - budget
        while over > 0 and (head or tail):
            longer = head if len(head) >= len(tail) else tail
            longer.pop()
            over -= 1
        return [CLS] + head + [SEP] + tail
