"""Per-source, per-stage corpus bookkeeping: document, word, and token counts."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from corpuskit.documents import Document, count_words

log = logging.getLogger(__name__)

TokenCounter = Callable[[str], int]


@dataclass(frozen=True)
class StageCount:
    docs: int
    words: int
    tokens: int | None = None

    def __post_init__(self) -> None:
        if self.docs < 0 or self.words < 0 or (self.tokens is not None and self.tokens < 0):
            raise ValueError("counts must be non-negative")


def collect_counts(docs: Iterable[Document], token_counter: TokenCounter | None = None) -> StageCount:
    n_docs = 0
    n_words = 0
    n_tokens = 0 if token_counter is not None else None
    for doc in docs:
        n_docs += 1
        n_words += count_words(doc.text)
        if token_counter is not None:
            n_tokens += token_counter(doc.text)
    return StageCount(docs=n_docs, words=n_words, tokens=n_tokens)


@dataclass
class CorpusStats:
    """Count table over (source, stage) cells; absent cells mark missing stages."""

    stages: list[str]
    sources: list[str]
    cells: dict[tuple[str, str], StageCount]

    def cell(self, source: str, stage: str) -> StageCount | None:
        return self.cells.get((source, stage))

    def total(self, stage: str) -> StageCount | None:
        counts = [self.cells[(src, stage)] for src in self.sources if (src, stage) in self.cells]
        if not counts:
            return None
        has_tokens = all(c.tokens is not None for c in counts)
        return StageCount(
            docs=sum(c.docs for c in counts),
            words=sum(c.words for c in counts),
            tokens=sum(c.tokens for c in counts) if has_tokens else None,
        )

    def check_monotonic(self) -> list[str]:
        """Names of (source, transition) pairs whose counts grew between stages."""
        problems = []
        for source in self.sources:
            previous = None
            for stage in self.stages:
                current = self.cells.get((source, stage))
                if current is None:
                    continue
                if previous is not None:
                    prev_stage, prev = previous
                    if current.docs > prev.docs or current.words > prev.words:
                        problems.append(f"{source}: {prev_stage} -> {stage} counts increased")
                previous = (stage, current)
        return problems

    def _format_cell(self, count: StageCount | None, attr: str) -> str:
        if count is None:
            return "-"
        value = getattr(count, attr)
        return "-" if value is None else str(value)

    def to_tsv(self) -> str:
        with_tokens = any(c.tokens is not None for c in self.cells.values())
        attrs = ("docs", "words", "tokens") if with_tokens else ("docs", "words")
        header = ["source"] + [f"{stage}_{attr}" for stage in self.stages for attr in attrs]
        lines = ["\t".join(header)]
        for source in self.sources:
            row = [source]
            for stage in self.stages:
                count = self.cell(source, stage)
                row += [self._format_cell(count, attr) for attr in attrs]
            lines.append("\t".join(row))
        totals = ["total"]
        for stage in self.stages:
            count = self.total(stage)
            totals += [self._format_cell(count, attr) for attr in attrs]
        lines.append("\t".join(totals))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        def as_dict(count: StageCount | None) -> dict | None:
            if count is None:
                return None
            return {"docs": count.docs, "words": count.words, "tokens": count.tokens}

        return {
            "stages": self.stages,
            "sources": {
                source: {stage: as_dict(self.cell(source, stage)) for stage in self.stages}
                for source in self.sources
            },
            "totals": {stage: as_dict(self.total(stage)) for stage in self.stages},
        }


def stage_stats(
    stage_sources: Mapping[str, Mapping[str, Iterable[Document] | StageCount]],
    token_counter: TokenCounter | None = None,
) -> CorpusStats:
    """Build the count table from per-stage, per-source document streams.

    Stages absent from the mapping simply leave gaps in the table. Values may
    be precomputed StageCounts when the documents were already consumed.
    """
    stages = list(stage_sources)
    sources: list[str] = []
    cells: dict[tuple[str, str], StageCount] = {}
    for stage, by_source in stage_sources.items():
        for source, docs in by_source.items():
            if source not in sources:
                sources.append(source)
            count = docs if isinstance(docs, StageCount) else collect_counts(docs, token_counter)
            cells[(source, stage)] = count
    stats = CorpusStats(stages=stages, sources=sources, cells=cells)
    for problem in stats.check_monotonic():
        log.warning("stage counts not monotonic: %s", problem)
    return stats


class VocabTokenCounter:
    """Greedy longest-prefix subword counter over an external vocabulary file.

    The vocabulary file holds one token per line. Each whitespace word is
    consumed left to right by the longest matching vocabulary entry, with a
    single character (one token) as fallback, so the count is defined for any
    input.
    """

    def __init__(self, vocab: Iterable[str]):
        self.vocab = {v for v in vocab if v}
        if not self.vocab:
            raise ValueError("vocabulary is empty")
        self._max_len = max(len(v) for v in self.vocab)

    @classmethod
    def from_file(cls, path: str | Path) -> "VocabTokenCounter":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line.strip() for line in lines)

    def __call__(self, text: str) -> int:
        total = 0
        for word in text.split():
            i = 0
            while i < len(word):
                step = 1
                for length in range(min(self._max_len, len(word) - i), 0, -1):
                    if word[i : i + length] in self.vocab:
                        step = length
                        break
                i += step
                total += 1
        return total
