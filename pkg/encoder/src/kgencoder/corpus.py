"""Description corpus and triplet file loading.

The corpus maps entity names to free-text descriptions, read from a TSV
of ``entity<TAB>text`` lines. Every entity the caller asks about
resolves to some text: entities missing from the file fall back to
their own name, with a warning, so downstream encoding stays total.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from .errors import CorpusError


@dataclass
class DescriptionCorpus:
    """Entity name -> description text, total via name fallback."""

    texts: dict[str, str]
    _warned: set[str] = field(default_factory=set, repr=False)

    def __contains__(self, name: str) -> bool:
        return name in self.texts

    def __len__(self) -> int:
        return len(self.texts)

    @property
    def names(self) -> list[str]:
        return list(self.texts)

    def text_for(self, name: str) -> str:
        if name in self.texts:
            return self.texts[name]
        if name not in self._warned:
            self._warned.add(name)
            warnings.warn(
                f"no description for entity {name!r}; using the name itself",
                stacklevel=2,
            )
        return name


def load_corpus(path) -> DescriptionCorpus:
    """Parse a ``entity<TAB>text`` TSV; names must be unique."""
    texts: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: expected entity<TAB>text")
            name, text = line.split("\t", 1)
            if not name:
                raise CorpusError(f"{path}:{lineno}: empty entity name")
            if name in texts:
                raise CorpusError(f"{path}:{lineno}: duplicate entity {name!r}")
            texts[name] = text
    return DescriptionCorpus(texts=texts)


def load_triplets(path) -> list[tuple[str, str, str]]:
    """Parse a ``head<TAB>relation<TAB>tail`` triplet file."""
    triplets = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            triplets.append((parts[0], parts[1], parts[2]))
    return triplets
