"""Token n-gram overlap auditing between evaluation items and training corpora.

The corpus is indexed once: every token n-gram up to ``max_n`` goes into a
hashed presence index. Each evaluation item is then assigned the length of the
longest run of its tokens that appears verbatim in the corpus. Because every
sub-gram of an indexed n-gram is itself indexed, presence is monotone in n and
the per-item search can binary search over n.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from corpuskit.bloom import BloomFilter
from corpuskit.evaluation import EvalItem, EvalTask

log = logging.getLogger(__name__)

# Alphanumeric runs; underscore is excluded on purpose.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_INDEX_MAGIC = b"CKNI"
_INDEX_VERSION = 1

QUANTILE_POINTS = (("min", 0.0), ("25%", 0.25), ("50%", 0.5), ("75%", 0.75), ("max", 1.0))


class TokenizerMismatchError(ValueError):
    """A persisted index was built with a different tokenizer configuration."""


@dataclass(frozen=True)
class AuditTokenizer:
    """Lowercasing alphanumeric tokenizer with an optional stopword list.

    Both sides of an audit must use the same instance configuration; the
    fingerprint ties persisted indexes to it.
    """

    stopwords: frozenset[str] = frozenset()
    lowercase: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    @classmethod
    def from_files(cls, *paths: str | Path, lowercase: bool = True) -> "AuditTokenizer":
        words = set()
        for path in paths:
            if path is None:
                continue
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                word = line.strip().lower()
                if word:
                    words.add(word)
        return cls(stopwords=frozenset(words), lowercase=lowercase)

    def tokenize(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        tokens = _TOKEN_RE.findall(text)
        if self.stopwords:
            tokens = [t for t in tokens if t not in self.stopwords]
        return tokens

    @property
    def fingerprint(self) -> str:
        payload = json.dumps(
            {"lowercase": self.lowercase, "stopwords": sorted(self.stopwords), "version": 1},
            sort_keys=True,
        )
        return hashlib.blake2b(payload.encode("utf-8"), digest_size=16).hexdigest()


def _digest(tokens: Sequence[str]) -> bytes:
    # \x1f cannot occur inside an alphanumeric token, so the join is injective.
    return hashlib.blake2b("\x1f".join(tokens).encode("utf-8"), digest_size=16).digest()


class NGramIndex:
    """Presence index over token n-grams of a corpus.

    The default backing store is an exact set of 128-bit digests. A
    Bloom-backed mode trades a bounded, reported false-positive rate for
    memory; neither mode ever reports false negatives.
    """

    def __init__(
        self,
        tokenizer: AuditTokenizer,
        max_n: int = 64,
        backend: str = "exact",
        capacity: int = 1_000_000,
        fpr: float = 1e-6,
        seed: int = 0,
    ):
        if max_n < 1:
            raise ValueError("max_n must be >= 1")
        if backend not in ("exact", "bloom"):
            raise ValueError(f"unknown index backend {backend!r}")
        self.tokenizer = tokenizer
        self.max_n = max_n
        self.backend = backend
        self.ngrams_indexed = 0
        self._exact: set[bytes] | None = None
        self._bloom: BloomFilter | None = None
        if backend == "exact":
            self._exact = set()
        else:
            self._bloom = BloomFilter.with_capacity(capacity, fpr, seed=seed)

    def _insert(self, digest: bytes) -> None:
        if self._exact is not None:
            self._exact.add(digest)
        else:
            self._bloom.insert(digest)
        self.ngrams_indexed += 1

    def add_tokens(self, tokens: Sequence[str]) -> None:
        top = min(self.max_n, len(tokens))
        for n in range(1, top + 1):
            for start in range(len(tokens) - n + 1):
                self._insert(_digest(tokens[start : start + n]))

    def add_document(self, text: str) -> int:
        tokens = self.tokenizer.tokenize(text)
        self.add_tokens(tokens)
        return len(tokens)

    def contains(self, tokens: Sequence[str]) -> bool:
        digest = _digest(tokens)
        if self._exact is not None:
            return digest in self._exact
        return self._bloom.contains(digest)

    def expected_fpr(self) -> float:
        return 0.0 if self._bloom is None else self._bloom.expected_fpr()

    def parameters(self) -> dict:
        params: dict = {
            "backend": self.backend,
            "max_n": self.max_n,
            "tokenizer_fingerprint": self.tokenizer.fingerprint,
            "ngrams_indexed": self.ngrams_indexed,
        }
        if self._bloom is not None:
            params["bloom"] = self._bloom.parameters()
            params["expected_fpr"] = self.expected_fpr()
        return params

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps(
            {
                "backend": self.backend,
                "max_n": self.max_n,
                "ngrams_indexed": self.ngrams_indexed,
                "tokenizer_fingerprint": self.tokenizer.fingerprint,
            },
            sort_keys=True,
        ).encode("utf-8")
        with open(path, "wb") as handle:
            handle.write(_INDEX_MAGIC)
            handle.write(_INDEX_VERSION.to_bytes(2, "big"))
            handle.write(len(header).to_bytes(4, "big"))
            handle.write(header)
            if self._exact is not None:
                for digest in sorted(self._exact):
                    handle.write(digest)
            else:
                handle.write(self._bloom.to_bytes())

    @classmethod
    def load(cls, path: str | Path, tokenizer: AuditTokenizer) -> "NGramIndex":
        path = Path(path)
        blob = path.read_bytes()
        if blob[:4] != _INDEX_MAGIC:
            raise ValueError(f"{path}: not an n-gram index file")
        version = int.from_bytes(blob[4:6], "big")
        if version != _INDEX_VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        header_len = int.from_bytes(blob[6:10], "big")
        header = json.loads(blob[10 : 10 + header_len].decode("utf-8"))
        if header["tokenizer_fingerprint"] != tokenizer.fingerprint:
            raise TokenizerMismatchError(
                f"{path}: index was built with a different tokenizer configuration"
            )
        index = cls.__new__(cls)
        index.tokenizer = tokenizer
        index.max_n = header["max_n"]
        index.backend = header["backend"]
        index.ngrams_indexed = header["ngrams_indexed"]
        payload = blob[10 + header_len :]
        if header["backend"] == "exact":
            if len(payload) % 16:
                raise ValueError(f"{path}: corrupt digest payload")
            index._exact = {payload[i : i + 16] for i in range(0, len(payload), 16)}
            index._bloom = None
        else:
            index._exact = None
            index._bloom = BloomFilter.from_bytes(payload)
        return index


def build_index(
    texts: Iterable[str],
    tokenizer: AuditTokenizer,
    max_n: int = 64,
    backend: str = "exact",
    capacity: int = 1_000_000,
    fpr: float = 1e-6,
) -> NGramIndex:
    index = NGramIndex(tokenizer, max_n=max_n, backend=backend, capacity=capacity, fpr=fpr)
    for text in texts:
        index.add_document(text)
    return index


def _any_window(index: NGramIndex, tokens: Sequence[str], n: int) -> bool:
    return any(index.contains(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def longest_match(tokens: Sequence[str], index: NGramIndex) -> int:
    """Largest n such that some n-gram of ``tokens`` is present in the index.

    Returns 0 when not even a single token matches. The search is capped at
    the index's max_n; items longer than that may in truth match longer runs.
    """
    hi = min(len(tokens), index.max_n)
    if hi == 0:
        return 0
    if hi <= 4:
        # Few candidate sizes: a descending scan beats the bisection setup.
        for n in range(hi, 0, -1):
            if _any_window(index, tokens, n):
                return n
        return 0
    if not _any_window(index, tokens, 1):
        return 0
    lo = 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _any_window(index, tokens, mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def nearest_rank(sorted_values: Sequence[int], q: float) -> int:
    """Nearest-rank quantile of an ascending sequence; q in [0, 1]."""
    if not sorted_values:
        raise ValueError("quantile of empty sequence")
    if q <= 0.0:
        return sorted_values[0]
    rank = math.ceil(q * len(sorted_values))
    return sorted_values[rank - 1]


@dataclass(frozen=True)
class QuantileCell:
    label: str
    n: int
    eligible: int
    contaminated: int

    @property
    def cont_pct(self) -> float:
        return 100.0 * self.contaminated / self.eligible if self.eligible else 0.0


@dataclass(frozen=True)
class BenchmarkContamination:
    benchmark: str
    items_total: int
    items_audited: int
    items_capped: int
    cells: tuple[QuantileCell, ...]

    @property
    def empty(self) -> bool:
        return self.items_audited == 0


@dataclass
class ContaminationReport:
    rows: list[BenchmarkContamination]
    max_n: int
    tokenizer_fingerprint: str

    def to_tsv(self) -> str:
        header = ["benchmark", "items"]
        for label, _ in QUANTILE_POINTS:
            header += [f"{label}_n", f"{label}_pct"]
        lines = ["\t".join(header)]
        for row in self.rows:
            if row.empty:
                cells = ["-", "-"] * len(QUANTILE_POINTS)
                lines.append("\t".join([row.benchmark, "0"] + cells))
                continue
            out = [row.benchmark, str(row.items_audited)]
            for cell in row.cells:
                out += [str(cell.n), f"{cell.cont_pct:.1f}"]
            lines.append("\t".join(out))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "max_n": self.max_n,
            "tokenizer_fingerprint": self.tokenizer_fingerprint,
            "benchmarks": [
                {
                    "benchmark": row.benchmark,
                    "items_total": row.items_total,
                    "items_audited": row.items_audited,
                    "items_capped": row.items_capped,
                    "empty": row.empty,
                    "quantiles": [
                        {
                            "label": cell.label,
                            "n": cell.n,
                            "eligible": cell.eligible,
                            "contaminated": cell.contaminated,
                            "cont_pct": cell.cont_pct,
                        }
                        for cell in row.cells
                    ],
                }
                for row in self.rows
            ],
        }


def item_audit_text(item: EvalItem) -> str:
    """Text of an item as seen by the audit: context, question, then all choices."""
    parts = [item.context] if item.context else []
    parts.append(item.question)
    parts.extend(item.choices)
    return " ".join(parts)


def audit_benchmark(name: str, items: Sequence[EvalItem], index: NGramIndex) -> BenchmarkContamination:
    tokenizer = index.tokenizer
    lengths: list[int] = []
    matches: list[int] = []
    capped = 0
    skipped = 0
    for item in items:
        tokens = tokenizer.tokenize(item_audit_text(item))
        if not tokens:
            # Length-0 items would make every threshold trivially true.
            skipped += 1
            continue
        if len(tokens) > index.max_n:
            capped += 1
        lengths.append(len(tokens))
        matches.append(longest_match(tokens, index))
    if skipped:
        log.warning("benchmark %s: %d items had no audit tokens and were skipped", name, skipped)
    if not lengths:
        return BenchmarkContamination(name, len(items), 0, 0, ())
    order = sorted(lengths)
    cells = []
    for label, q in QUANTILE_POINTS:
        n_q = nearest_rank(order, q)
        eligible_pairs = [(l, m) for l, m in zip(lengths, matches) if l >= n_q]
        contaminated = sum(1 for _, m in eligible_pairs if m >= n_q)
        cells.append(QuantileCell(label=label, n=n_q, eligible=len(eligible_pairs), contaminated=contaminated))
    return BenchmarkContamination(
        benchmark=name,
        items_total=len(items),
        items_audited=len(lengths),
        items_capped=capped,
        cells=tuple(cells),
    )


def contamination_report(benchmarks: Sequence[EvalTask], index: NGramIndex) -> ContaminationReport:
    """Quantile contamination table for every benchmark against one shared index."""
    rows = [audit_benchmark(task.name, task.items, index) for task in benchmarks]
    for row in rows:
        if row.empty:
            log.warning("benchmark %s has no auditable items", row.benchmark)
    return ContaminationReport(
        rows=rows,
        max_n=index.max_n,
        tokenizer_fingerprint=index.tokenizer.fingerprint,
    )
