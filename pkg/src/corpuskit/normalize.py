"""Encoding and whitespace canonicalization applied before any other stage."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import replace

from corpuskit.documents import Document

# meta flag set on documents whose text normalizes to nothing; they are kept
# here and removed later by the minimum word count filter.
EMPTY_FLAG = "empty_after_normalization"

_EXTRA_BLANK_LINES = re.compile(r"\n{3,}")


def normalize_text(text: str) -> str:
    """Return the canonical form of ``text``.

    The canonical form is NFC, uses LF newlines only, has runs of horizontal
    whitespace collapsed to single spaces, no whitespace at line edges, at most
    one blank line in a row, and no blank lines at either end. The function is
    total and idempotent, and never changes the word count.
    """
    text = unicodedata.normalize("NFC", text)
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    # Within one line, str.split collapses every remaining whitespace class.
    lines = (" ".join(line.split()) for line in text.split("\n"))
    collapsed = _EXTRA_BLANK_LINES.sub("\n\n", "\n".join(lines))
    return collapsed.strip("\n")


def normalize_document(doc: Document) -> Document:
    """Normalize the text of ``doc``, flagging but keeping empty results."""
    new_text = normalize_text(doc.text)
    meta = doc.meta
    if not new_text:
        meta = dict(meta)
        meta[EMPTY_FLAG] = "true"
    return replace(doc, text=new_text, meta=meta)
