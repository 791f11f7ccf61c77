"""Character-trigram language scorer used as the default language-fraction tagger.

The classifier is deliberately small: two add-one-smoothed trigram models, one
trained on a seed sample of the target language and one on a contrast sample.
Each line of a document is assigned to whichever model likes it better and the
reported fraction is character-weighted, so a half-target half-other document
scores near 0.5.
"""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path


def _trigrams(line: str) -> list[str]:
    padded = f" {line.lower()} "
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


class TrigramLanguageClassifier:
    def __init__(self, target_counts: Counter, other_counts: Counter):
        if not target_counts or not other_counts:
            raise ValueError("both seed samples must produce at least one trigram")
        self._target = target_counts
        self._other = other_counts
        self._target_total = sum(target_counts.values())
        self._other_total = sum(other_counts.values())
        # Shared vocabulary keeps the two smoothed models comparable.
        self._vocab_size = len(set(target_counts) | set(other_counts)) + 1

    @classmethod
    def train(cls, target_text: str, other_text: str) -> "TrigramLanguageClassifier":
        target = Counter(g for line in target_text.splitlines() for g in _trigrams(line))
        other = Counter(g for line in other_text.splitlines() for g in _trigrams(line))
        return cls(target, other)

    @classmethod
    def from_seed_files(cls, target_path: str | Path, other_path: str | Path) -> "TrigramLanguageClassifier":
        target = Path(target_path).read_text(encoding="utf-8")
        other = Path(other_path).read_text(encoding="utf-8")
        return cls.train(target, other)

    def _loglik(self, counts: Counter, total: int, grams: list[str]) -> float:
        score = 0.0
        for gram in grams:
            score += math.log((counts.get(gram, 0) + 1) / (total + self._vocab_size))
        return score / len(grams)

    def _line_is_target(self, line: str) -> bool:
        grams = _trigrams(line)
        return self._loglik(self._target, self._target_total, grams) >= self._loglik(
            self._other, self._other_total, grams
        )

    def __call__(self, text: str) -> float:
        """Fraction of the text, by characters, on the target side of the model pair."""
        lines = [line for line in text.split("\n") if line.strip()]
        if not lines:
            return 0.0
        total = sum(len(line) for line in lines)
        target = sum(len(line) for line in lines if self._line_is_target(line))
        return target / total


class ConstantClassifier:
    """Fixed-value stand-in for configurations without seed samples."""

    def __init__(self, value: float = 1.0):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"language fraction must be in [0, 1], got {value}")
        self.value = value

    def __call__(self, text: str) -> float:
        return self.value
