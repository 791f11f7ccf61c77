"""Priority-ordered URL, document, and paragraph deduplication.

Sources are processed from most to least preferred, so whenever duplicates
exist across sources the copy from the better source survives. Near-duplicate
matching is exact matching over an aggressive canonical form: lowercased text
with punctuation removed and whitespace collapsed, hashed to 64 bits. URL
duplicates are resolved before content is even looked at.
"""

from __future__ import annotations

import hashlib
import logging
import unicodedata
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Iterator, Mapping
from urllib.parse import urlsplit, urlunsplit

from corpuskit.bloom import BloomFilter
from corpuskit.documents import Document, SourceSpec, validate_sources

log = logging.getLogger(__name__)

REASON_UNIQUE = "unique"
REASON_URL_DUP = "url_dup"
REASON_CONTENT_DUP = "content_dup"
REASON_PARAGRAPH_REDUCED = "paragraph_reduced"
REASONS = (REASON_UNIQUE, REASON_URL_DUP, REASON_CONTENT_DUP, REASON_PARAGRAPH_REDUCED)


@dataclass(frozen=True)
class DedupDecision:
    """Audit record for one document seen by a dedup pass."""

    doc_id: str
    kept: bool
    reason: str
    surviving_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.reason not in REASONS:
            raise ValueError(f"unknown dedup reason {self.reason!r}")
        if not self.kept and self.reason not in (REASON_URL_DUP, REASON_CONTENT_DUP):
            raise ValueError(f"dropped document must carry a duplicate reason, got {self.reason!r}")
        if not 0.0 <= self.surviving_fraction <= 1.0:
            raise ValueError(f"surviving_fraction out of range: {self.surviving_fraction}")
        if self.surviving_fraction < 1.0 and self.reason != REASON_PARAGRAPH_REDUCED:
            raise ValueError("surviving_fraction below 1 requires reason paragraph_reduced")

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "kept": self.kept,
            "reason": self.reason,
            "surviving_fraction": self.surviving_fraction,
        }


@dataclass(frozen=True)
class DedupConfig:
    """Filter sizing and paragraph handling for a dedup pass."""

    expected_docs: int = 1_000_000
    target_fpr: float = 1e-6
    paragraphs_per_doc: int = 8
    min_paragraphs: int = 1
    seed: int = 0
    m_bits: int | None = None
    hash_count: int | None = None

    def __post_init__(self) -> None:
        if self.expected_docs < 1:
            raise ValueError("expected_docs must be >= 1")
        if not 0.0 < self.target_fpr < 1.0:
            raise ValueError("target_fpr must be in (0, 1)")
        if self.min_paragraphs < 1:
            raise ValueError("min_paragraphs must be >= 1")
        if (self.m_bits is None) != (self.hash_count is None):
            raise ValueError("m_bits and hash_count must be given together")


@lru_cache(maxsize=None)
def _is_punctuation(ch: str) -> bool:
    # Memoized per code point; Unicode has far more punctuation than any
    # literal set could cover.
    return unicodedata.category(ch).startswith("P")


def canonical_content(text: str) -> str:
    """Aggressive canonical form: lowercase, no punctuation, collapsed whitespace."""
    lowered = text.lower()
    stripped = "".join(c for c in lowered if not _is_punctuation(c))
    return " ".join(stripped.split())


def content_key(text: str) -> bytes:
    """64-bit digest of the canonical form; equal canonical texts share keys."""
    return hashlib.blake2b(canonical_content(text).encode("utf-8"), digest_size=8).digest()


def canonicalize_url(url: str) -> str:
    """Lowercase scheme and host, drop the fragment, strip trailing slashes."""
    url = url.strip()
    try:
        parts = urlsplit(url)
    except ValueError:
        return url.lower()
    return urlunsplit(
        (parts.scheme.lower(), parts.netloc.lower(), parts.path.rstrip("/"), parts.query, "")
    )


def split_paragraphs(text: str) -> list[str]:
    """Newline-delimited blocks of the text, blank lines excluded."""
    return [line for line in text.split("\n") if line.strip()]


class DedupEngine:
    """Streaming dedup over sources in priority order.

    Three separate Bloom filters back the pass (URLs, document content,
    paragraphs) so the configured false-positive bound applies to each key
    space independently.
    """

    def __init__(self, sources: Iterable[SourceSpec], config: DedupConfig | None = None):
        self.sources = validate_sources(sources)
        self.config = config or DedupConfig()
        cfg = self.config
        if cfg.m_bits is not None and cfg.hash_count is not None:
            self._url_filter = BloomFilter(cfg.m_bits, cfg.hash_count, seed=cfg.seed)
            self._content_filter = BloomFilter(cfg.m_bits, cfg.hash_count, seed=cfg.seed + 1)
            self._paragraph_filter = BloomFilter(cfg.m_bits, cfg.hash_count, seed=cfg.seed + 2)
        else:
            self._url_filter = BloomFilter.with_capacity(cfg.expected_docs, cfg.target_fpr, seed=cfg.seed)
            self._content_filter = BloomFilter.with_capacity(
                cfg.expected_docs, cfg.target_fpr, seed=cfg.seed + 1
            )
            self._paragraph_filter = BloomFilter.with_capacity(
                cfg.expected_docs * cfg.paragraphs_per_doc, cfg.target_fpr, seed=cfg.seed + 2
            )

    def filter_parameters(self) -> dict:
        return {
            "url": self._url_filter.parameters(),
            "content": self._content_filter.parameters(),
            "paragraph": self._paragraph_filter.parameters(),
        }

    def expected_fpr(self) -> float:
        return max(
            self._url_filter.expected_fpr(),
            self._content_filter.expected_fpr(),
            self._paragraph_filter.expected_fpr(),
        )

    def _dedup_paragraphs(self, doc: Document) -> tuple[Document | None, DedupDecision]:
        paragraphs = split_paragraphs(doc.text)
        kept: list[str] = []
        kept_keys: list[bytes] = []
        seen_here: set[bytes] = set()
        for paragraph in paragraphs:
            key = content_key(paragraph)
            if key in seen_here or self._paragraph_filter.contains(key):
                continue
            seen_here.add(key)
            kept.append(paragraph)
            kept_keys.append(key)
        if len(kept) < self.config.min_paragraphs:
            # Nothing from this document is registered, so its content can
            # still survive through a later copy.
            return None, DedupDecision(doc.id, kept=False, reason=REASON_CONTENT_DUP)
        for key in kept_keys:
            self._paragraph_filter.insert(key)
        if len(kept) == len(paragraphs):
            return doc, DedupDecision(doc.id, kept=True, reason=REASON_UNIQUE)
        new_text = "\n".join(kept)
        # The rewritten text gets its own content key so later exact copies of
        # it are still recognized as duplicates.
        self._content_filter.insert(content_key(new_text))
        fraction = len(kept) / len(paragraphs)
        return (
            replace(doc, text=new_text),
            DedupDecision(doc.id, kept=True, reason=REASON_PARAGRAPH_REDUCED, surviving_fraction=fraction),
        )

    def _process_document(self, spec: SourceSpec, doc: Document) -> tuple[Document | None, DedupDecision]:
        if doc.url:
            url_key = canonicalize_url(doc.url).encode("utf-8")
            if self._url_filter.add(url_key):
                return None, DedupDecision(doc.id, kept=False, reason=REASON_URL_DUP)
        if self._content_filter.add(content_key(doc.text)):
            return None, DedupDecision(doc.id, kept=False, reason=REASON_CONTENT_DUP)
        if spec.paragraph_dedup:
            return self._dedup_paragraphs(doc)
        for paragraph in split_paragraphs(doc.text):
            self._paragraph_filter.insert(content_key(paragraph))
        return doc, DedupDecision(doc.id, kept=True, reason=REASON_UNIQUE)

    def process_source(
        self, spec: SourceSpec, docs: Iterable[Document]
    ) -> Iterator[tuple[Document | None, DedupDecision]]:
        for doc in docs:
            yield self._process_document(spec, doc)

    def process(
        self, docs_by_source: Mapping[str, Iterable[Document]]
    ) -> Iterator[tuple[SourceSpec, Document | None, DedupDecision]]:
        for spec in self.sources:
            for doc, decision in self.process_source(spec, docs_by_source.get(spec.name, ())):
                yield spec, doc, decision


def dedup_pass(
    sources: Iterable[SourceSpec],
    docs_by_source: Mapping[str, Iterable[Document]],
    config: DedupConfig | None = None,
) -> tuple[dict[str, list[Document]], list[DedupDecision]]:
    """Run a full dedup pass and collect survivors per source plus the audit trail."""
    engine = DedupEngine(sources, config)
    survivors: dict[str, list[Document]] = {spec.name: [] for spec in engine.sources}
    decisions: list[DedupDecision] = []
    for spec, doc, decision in engine.process(docs_by_source):
        if doc is not None:
            survivors[spec.name].append(doc)
        decisions.append(decision)
    return survivors, decisions
