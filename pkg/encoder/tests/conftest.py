"""Shared fixtures: a lexically separable toy corpus and its triplets."""

import numpy as np
import pytest

from kgencoder import DescriptionCorpus

RED_WORDS = ("crimson", "scarlet", "ruby")
BLUE_WORDS = ("cobalt", "azure", "navy")


def separable_corpus(n_per_side=8, seed=0):
    """Entities split into two lexical camps with disjoint word pools."""
    rng = np.random.default_rng(seed)
    texts = {}
    for i in range(n_per_side):
        texts[f"a{i}"] = f"a{i} is a {rng.choice(RED_WORDS)} beast with {rng.choice(RED_WORDS)} fur"
        texts[f"b{i}"] = f"b{i} is a {rng.choice(BLUE_WORDS)} machine with {rng.choice(BLUE_WORDS)} plates"
    return DescriptionCorpus(texts=texts)


def separable_triplets(n_per_side=8):
    """Relation is determined by which camp the head belongs to."""
    triplets = []
    for i in range(n_per_side):
        for j in range(n_per_side):
            triplets.append((f"a{i}", "likes", f"b{j}"))
            triplets.append((f"b{i}", "fears", f"a{j}"))
    return triplets


@pytest.fixture
def toy_corpus():
    return separable_corpus()


@pytest.fixture
def toy_triplets():
    return separable_triplets()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
