"""Per-document feature tagging and threshold-based quality filtering.

Every document gets a full TagVector regardless of how many filters it trips,
and every verdict lists all triggered filters, so the drop report can show
per-filter percentages that deliberately do not sum to the total drop rate.
All threshold comparisons are strict: a document sitting exactly on a
threshold is kept.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Mapping, Sequence

from corpuskit.documents import Document

log = logging.getLogger(__name__)

# Canonical filter order, used for report rows.
FILTER_NAMES = (
    "eu",
    "n_words",
    "word_len_low",
    "word_len_high",
    "alpha",
    "symbols",
    "ellipsis",
    "bullets",
    "lorem_ipsum",
    "brackets",
    "quality",
)

LanguageClassifier = Callable[[str], float]
QualityScorer = Callable[[str, "TagVector"], float]


@dataclass(frozen=True)
class TagVector:
    """Measured features of one document."""

    lang_fraction: float
    n_words: int
    mean_word_len: float
    bullet_fraction: float
    ellipsis_fraction: float
    has_lorem_ipsum: bool
    has_brace: bool
    symbol_ratio: float
    alpha_fraction: float
    quality_score: float

    def __post_init__(self) -> None:
        for name in ("lang_fraction", "bullet_fraction", "ellipsis_fraction", "alpha_fraction", "quality_score"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {value}")
        if self.n_words < 0:
            raise ValueError(f"n_words negative: {self.n_words}")
        if self.mean_word_len < 0 or self.symbol_ratio < 0:
            raise ValueError("mean_word_len and symbol_ratio must be non-negative")
        if (self.mean_word_len == 0) != (self.n_words == 0):
            raise ValueError("mean_word_len is zero exactly when n_words is zero")


@dataclass(frozen=True)
class FilterThresholds:
    """Cut points for apply_filters; every comparison is strict."""

    min_lang_fraction: float = 0.5
    min_words: int = 4
    min_mean_word_len: float = 3.0
    max_mean_word_len: float = 12.0
    min_alpha_fraction: float = 0.8
    max_symbol_ratio: float = 0.1
    max_ellipsis_fraction: float = 0.3
    max_bullet_fraction: float = 0.9
    min_quality_score: float = 0.55

    @classmethod
    def from_mapping(cls, overrides: Mapping[str, float]) -> "FilterThresholds":
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown threshold names: {sorted(unknown)}")
        return cls(**overrides)


DEFAULT_THRESHOLDS = FilterThresholds()


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome for one document: kept exactly when nothing triggered."""

    doc_id: str
    triggered: frozenset[str]

    @property
    def kept(self) -> bool:
        return not self.triggered

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "kept": self.kept, "triggered": sorted(self.triggered)}


@dataclass
class ClassifierErrors:
    """Documents where a pluggable classifier raised; tagged with sentinel 0."""

    doc_ids: list[str] = field(default_factory=list)
    stages: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.doc_ids)

    def record(self, doc_id: str, stage: str) -> None:
        self.doc_ids.append(doc_id)
        self.stages.append(stage)


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def tag_document(
    doc: Document,
    lang_id: LanguageClassifier,
    quality: QualityScorer,
    errors: ClassifierErrors | None = None,
) -> TagVector:
    """Measure all features of ``doc``, falling back to sentinel 0 on classifier failure."""
    text = doc.text
    lines = text.split("\n")
    words = text.split()
    n_words = len(words)
    mean_word_len = sum(len(w) for w in words) / n_words if words else 0.0
    bullet_fraction = sum(1 for l in lines if l.lstrip().startswith(("*", "-"))) / len(lines)
    ellipsis_fraction = sum(1 for l in lines if l.rstrip().endswith(("…", "..."))) / len(lines)
    symbol_ratio = (text.count("#") + text.count("…")) / n_words if n_words else 0.0
    alpha_fraction = (
        sum(1 for w in words if any(c.isalpha() for c in w)) / n_words if n_words else 0.0
    )
    try:
        lang_fraction = _clamp01(float(lang_id(text)))
    except Exception:
        log.exception("language classifier failed on document %s", doc.id)
        lang_fraction = 0.0
        if errors is not None:
            errors.record(doc.id, "lang_id")
    tags = TagVector(
        lang_fraction=lang_fraction,
        n_words=n_words,
        mean_word_len=mean_word_len,
        bullet_fraction=bullet_fraction,
        ellipsis_fraction=ellipsis_fraction,
        has_lorem_ipsum="lorem ipsum" in text.lower(),
        has_brace="{" in text,
        symbol_ratio=symbol_ratio,
        alpha_fraction=alpha_fraction,
        quality_score=0.0,
    )
    try:
        score = _clamp01(float(quality(text, tags)))
    except Exception:
        log.exception("quality scorer failed on document %s", doc.id)
        score = 0.0
        if errors is not None:
            errors.record(doc.id, "quality")
    return replace(tags, quality_score=score)


def apply_filters(
    tags: TagVector,
    thresholds: FilterThresholds | None = None,
    doc_id: str = "",
) -> FilterVerdict:
    t = thresholds or DEFAULT_THRESHOLDS
    triggered = set()
    if tags.lang_fraction < t.min_lang_fraction:
        triggered.add("eu")
    if tags.n_words < t.min_words:
        triggered.add("n_words")
    if tags.mean_word_len < t.min_mean_word_len:
        triggered.add("word_len_low")
    if tags.mean_word_len > t.max_mean_word_len:
        triggered.add("word_len_high")
    if tags.alpha_fraction < t.min_alpha_fraction:
        triggered.add("alpha")
    if tags.symbol_ratio > t.max_symbol_ratio:
        triggered.add("symbols")
    if tags.ellipsis_fraction > t.max_ellipsis_fraction:
        triggered.add("ellipsis")
    if tags.bullet_fraction > t.max_bullet_fraction:
        triggered.add("bullets")
    if tags.has_lorem_ipsum:
        triggered.add("lorem_ipsum")
    if tags.has_brace:
        triggered.add("brackets")
    if tags.quality_score < t.min_quality_score:
        triggered.add("quality")
    return FilterVerdict(doc_id=doc_id, triggered=frozenset(triggered))


class HeuristicQualityScorer:
    """Logistic blend of the measured tags, standing in for an external quality model."""

    concurrency_safe = True

    def __call__(self, text: str, tags: TagVector) -> float:
        length_signal = min(tags.n_words, 200) / 200
        word_len_signal = 1.0 if 3.0 <= tags.mean_word_len <= 12.0 else 0.0
        z = (
            -2.5
            + 4.0 * tags.lang_fraction
            + 2.5 * tags.alpha_fraction
            + 1.0 * length_signal
            + 0.5 * word_len_signal
            - 4.0 * min(tags.symbol_ratio, 1.0)
            - 1.5 * tags.bullet_fraction
            - 1.5 * tags.ellipsis_fraction
            - 1.0 * tags.has_lorem_ipsum
            - 0.5 * tags.has_brace
        )
        return 1.0 / (1.0 + math.exp(-z))


class ConstantQualityScorer:
    def __init__(self, value: float = 1.0):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"quality score must be in [0, 1], got {value}")
        self.value = value

    def __call__(self, text: str, tags: TagVector) -> float:
        return self.value


@dataclass
class FilterReport:
    """Per-source, per-filter drop percentages plus overall drop counts."""

    sources: list[str]
    doc_counts: dict[str, int]
    dropped_counts: dict[str, int]
    triggered_counts: dict[str, dict[str, int]]

    def drop_pct(self, source: str, filter_name: str) -> float:
        total = self.doc_counts[source]
        if total == 0:
            return 0.0
        return 100.0 * self.triggered_counts[source].get(filter_name, 0) / total

    def overall_drop_pct(self, source: str) -> float:
        total = self.doc_counts[source]
        if total == 0:
            return 0.0
        return 100.0 * self.dropped_counts[source] / total

    def to_tsv(self) -> str:
        lines = ["\t".join(["filter"] + self.sources)]
        for name in FILTER_NAMES:
            row = [name] + [f"{self.drop_pct(src, name):.2f}" for src in self.sources]
            lines.append("\t".join(row))
        lines.append(
            "\t".join(["(dropped)"] + [f"{self.overall_drop_pct(src):.2f}" for src in self.sources])
        )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "sources": {
                src: {
                    "documents": self.doc_counts[src],
                    "dropped": self.dropped_counts[src],
                    "drop_pct": self.overall_drop_pct(src),
                    "by_filter": {name: self.drop_pct(src, name) for name in FILTER_NAMES},
                }
                for src in self.sources
            }
        }


def filter_report(verdicts_by_source: Mapping[str, Sequence[FilterVerdict]]) -> FilterReport:
    """Tabulate triggered-filter percentages per source.

    A document counts toward every filter it triggered, so filter rows may sum
    to more than the overall drop rate.
    """
    sources = list(verdicts_by_source)
    doc_counts: dict[str, int] = {}
    dropped_counts: dict[str, int] = {}
    triggered_counts: dict[str, dict[str, int]] = {}
    for source, verdicts in verdicts_by_source.items():
        doc_counts[source] = len(verdicts)
        dropped_counts[source] = sum(1 for v in verdicts if not v.kept)
        per_filter: dict[str, int] = {name: 0 for name in FILTER_NAMES}
        for verdict in verdicts:
            for name in verdict.triggered:
                per_filter[name] += 1
        triggered_counts[source] = per_filter
    return FilterReport(
        sources=sources,
        doc_counts=doc_counts,
        dropped_counts=dropped_counts,
        triggered_counts=triggered_counts,
    )
