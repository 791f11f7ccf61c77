"""Document model and line-delimited JSON corpus I/O.

A corpus file holds one JSON object per line with the keys ``id``, ``source``,
``text`` and optionally ``url``. Any other key is preserved in ``Document.meta``
so that unknown upstream annotations survive a read/write cycle. Files ending
in ``.gz`` are compressed transparently.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

# Top-level record keys owned by the Document type itself. meta may not shadow
# them, otherwise a write would be ambiguous.
RESERVED_KEYS = frozenset({"id", "source", "url", "text"})


class MalformedRecordError(ValueError):
    """Raised when a corpus line cannot be turned into a Document."""

    def __init__(self, path: str | Path, line_number: int, reason: str):
        super().__init__(f"{path}:{line_number}: {reason}")
        self.path = str(path)
        self.line_number = line_number
        self.reason = reason


class CorpusWriteError(OSError):
    """I/O failure while writing a corpus; carries the partial write count."""

    def __init__(self, path: str | Path, written: int, cause: Exception):
        super().__init__(f"{path}: write failed after {written} documents: {cause}")
        self.path = str(path)
        self.written = written


@dataclass(frozen=True)
class Document:
    """One corpus document. Immutable; derive changed copies with dataclasses.replace."""

    id: str
    source: str
    text: str
    url: str | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not isinstance(self.text, str):
            raise ValueError(f"document {self.id}: text must be a string")
        clash = RESERVED_KEYS.intersection(self.meta)
        if clash:
            raise ValueError(f"document {self.id}: meta keys shadow record keys: {sorted(clash)}")

    def to_record(self) -> dict:
        record: dict = {"id": self.id, "source": self.source, "text": self.text}
        if self.url is not None:
            record["url"] = self.url
        record.update(self.meta)
        return record


@dataclass(frozen=True)
class SourceSpec:
    """Declared corpus source. Lower priority rank wins ties during dedup."""

    name: str
    priority: int
    paragraph_dedup: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("source name must be non-empty")
        if self.priority < 1:
            raise ValueError(f"source {self.name}: priority must be >= 1, got {self.priority}")


def validate_sources(sources: Iterable[SourceSpec]) -> list[SourceSpec]:
    """Check name and priority uniqueness and return the specs sorted by priority."""
    specs = list(sources)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate source names: {sorted(names)}")
    priorities = [s.priority for s in specs]
    if len(set(priorities)) != len(priorities):
        raise ValueError("source priorities must form a total order, got duplicates")
    return sorted(specs, key=lambda s: s.priority)


@dataclass
class ReadErrors:
    """Accumulator for malformed lines skipped during a read."""

    lines: list[int] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.lines)

    def record(self, line_number: int, reason: str) -> None:
        self.lines.append(line_number)
        self.reasons.append(reason)


def open_corpus(path: str | Path, mode: str = "rt") -> IO[str]:
    """Open a corpus file for text I/O, going through gzip when the name ends in .gz."""
    path = Path(path)
    if path.name.endswith(".gz"):
        if any(flag in mode for flag in "wax"):
            # A pinned header mtime keeps rewritten archives byte-identical.
            binary = gzip.GzipFile(str(path), mode.replace("t", "") or "w", mtime=0)
            return io.TextIOWrapper(binary, encoding="utf-8", errors="replace")
        return gzip.open(path, mode, encoding="utf-8", errors="replace")
    return open(path, mode, encoding="utf-8", errors="replace")


def _parse_record(obj: object, path: str | Path, line_number: int) -> Document:
    if not isinstance(obj, dict):
        raise MalformedRecordError(path, line_number, "record is not a JSON object")
    for key in ("id", "source", "text"):
        if key not in obj:
            raise MalformedRecordError(path, line_number, f"missing required key {key!r}")
        if not isinstance(obj[key], str):
            raise MalformedRecordError(path, line_number, f"key {key!r} is not a string")
    if not obj["id"]:
        raise MalformedRecordError(path, line_number, "empty document id")
    url = obj.get("url")
    if url is not None and not isinstance(url, str):
        raise MalformedRecordError(path, line_number, "key 'url' is not a string")
    meta: dict[str, str] = {}
    for key, value in obj.items():
        if key in RESERVED_KEYS:
            continue
        # Non-string extras are kept as their compact JSON form so the values
        # stay deterministic and round-trippable.
        meta[key] = value if isinstance(value, str) else json.dumps(
            value, ensure_ascii=False, sort_keys=True
        )
    return Document(id=obj["id"], source=obj["source"], text=obj["text"], url=url, meta=meta)


def read_documents(
    path: str | Path,
    skip_malformed: bool = False,
    errors: ReadErrors | None = None,
) -> Iterator[Document]:
    """Stream documents from a corpus file.

    With ``skip_malformed`` unset a bad line aborts the read by raising
    MalformedRecordError. With it set, bad lines are counted into ``errors``
    (when given) and the stream continues.
    """
    with open_corpus(path) as handle:
        for line_number, line in enumerate(handle, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                if not skip_malformed:
                    raise MalformedRecordError(path, line_number, f"invalid JSON: {exc.msg}") from exc
                if errors is not None:
                    errors.record(line_number, f"invalid JSON: {exc.msg}")
                continue
            try:
                yield _parse_record(obj, path, line_number)
            except MalformedRecordError as exc:
                if not skip_malformed:
                    raise
                if errors is not None:
                    errors.record(line_number, exc.reason)


def write_documents(docs: Iterable[Document], path: str | Path) -> int:
    """Write documents as one JSON object per line and return how many were written.

    JSON string escaping guarantees one line per record even when texts contain
    newlines. On I/O failure the partial count is carried by CorpusWriteError.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    try:
        with open_corpus(path, "wt") as handle:
            for doc in docs:
                handle.write(json.dumps(doc.to_record(), ensure_ascii=False))
                handle.write("\n")
                written += 1
    except OSError as exc:
        raise CorpusWriteError(path, written, exc) from exc
    return written


def count_words(text: str) -> int:
    """Number of maximal non-whitespace runs under Unicode whitespace splitting."""
    return len(text.split())
