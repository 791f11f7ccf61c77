"""Seeded shuffling and test/dev/train partitioning, applied per source."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Sequence

from corpuskit.documents import Document

# Recorded in run manifests so the permutation algorithm is pinned down.
SPLIT_PRNG = "python-random-mt19937-fisher-yates"

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class SplitAssignment:
    doc_id: str
    split: str
    seed: int

    def __post_init__(self) -> None:
        if self.split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {self.split!r}")


def split_sizes(n: int, test_fraction: float = 0.01, dev_fraction: float = 0.01) -> tuple[int, int, int]:
    """Target sizes (test, dev, train); the held-out slices round up but never overlap.

    Held-out slices are taken in order, so a corpus too small to fill both
    gives test precedence (n = 1 yields test only).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    n_test = min(math.ceil(test_fraction * n), n)
    n_dev = min(math.ceil(dev_fraction * n), n - n_test)
    return n_test, n_dev, n - n_test - n_dev


def split_source(
    docs: Sequence[Document],
    seed: int,
    test_fraction: float = 0.01,
    dev_fraction: float = 0.01,
) -> tuple[list[Document], list[Document], list[Document]]:
    """Partition ``docs`` into (train, dev, test) via a seeded permutation.

    The first ceil(test_fraction * n) documents of the permutation become the
    test split, the next ceil(dev_fraction * n) the dev split, the remainder
    the train split. The three lists are disjoint and cover the input.
    """
    order = list(docs)
    random.Random(seed).shuffle(order)
    n_test, n_dev, _ = split_sizes(len(order), test_fraction, dev_fraction)
    test = order[:n_test]
    dev = order[n_test : n_test + n_dev]
    train = order[n_test + n_dev :]
    return train, dev, test


def derive_seed(base_seed: int, source: str) -> int:
    """Stable per-source seed so each source gets its own permutation."""
    digest = hashlib.blake2b(f"{base_seed}:{source}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def split_assignments(
    splits: tuple[Sequence[Document], Sequence[Document], Sequence[Document]], seed: int
) -> list[SplitAssignment]:
    train, dev, test = splits
    out = [SplitAssignment(doc.id, "train", seed) for doc in train]
    out += [SplitAssignment(doc.id, "dev", seed) for doc in dev]
    out += [SplitAssignment(doc.id, "test", seed) for doc in test]
    return out
