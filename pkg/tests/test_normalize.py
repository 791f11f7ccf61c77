import unicodedata

from hypothesis import given, settings, strategies as st

from corpuskit.documents import Document, count_words
from corpuskit.normalize import EMPTY_FLAG, normalize_document, normalize_text


def test_crlf_becomes_lf():
    assert normalize_text("a\r\nb") == "a\nb"
    assert normalize_text("a\rb") == "a\nb"


def test_horizontal_whitespace_collapses():
    assert normalize_text("a\t\t b") == "a b"
    assert normalize_text("a     b") == "a b"


def test_blank_line_runs_collapse():
    assert normalize_text("a\n\n\n\nb") == "a\n\nb"
    assert normalize_text("a\n\n\n\n\n\n\nb") == "a\n\nb"


def test_single_blank_line_is_kept():
    assert normalize_text("a\n\nb") == "a\n\nb"


def test_line_edges_are_stripped():
    assert normalize_text("  hi  ") == "hi"
    assert normalize_text(" x \n y ") == "x\ny"


def test_nfc_composition():
    decomposed = "é"
    assert normalize_text(decomposed) == "é"


def test_whitespace_only_becomes_empty():
    assert normalize_text(" \t \r\n  \n ") == ""


def test_empty_in_empty_out():
    assert normalize_text("") == ""


def test_normalize_document_flags_empty():
    doc = Document(id="a", source="s", text="   \n\t ")
    out = normalize_document(doc)
    assert out.text == ""
    assert out.meta[EMPTY_FLAG] == "true"
    assert doc.meta == {}


def test_normalize_document_keeps_meta_and_identity():
    doc = Document(id="a", source="s", text=" x ", url="http://e.eus", meta={"k": "v"})
    out = normalize_document(doc)
    assert out.text == "x"
    assert out.id == doc.id and out.url == doc.url
    assert out.meta == {"k": "v"}
    assert EMPTY_FLAG not in out.meta


# Unrestricted text plus extra weight on the whitespace classes the rules
# target, so the property suite actually exercises them.
_whitespaceish = st.sampled_from(" \t\r\n   \x0b\x0c")
_texts = st.one_of(
    st.text(max_size=200),
    st.lists(st.one_of(st.text(max_size=8), _whitespaceish), max_size=60).map("".join),
)


@settings(max_examples=1000, deadline=None)
@given(_texts)
def test_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once


@settings(max_examples=500, deadline=None)
@given(_texts)
def test_word_count_preserved(text):
    assert count_words(normalize_text(text)) == count_words(text)


@settings(max_examples=500, deadline=None)
@given(_texts)
def test_output_has_no_cr_tab_or_triple_newline(text):
    out = normalize_text(text)
    assert "\r" not in out
    assert "\t" not in out
    assert "\n\n\n" not in out


@settings(max_examples=300, deadline=None)
@given(_texts)
def test_output_is_nfc(text):
    out = normalize_text(text)
    assert unicodedata.is_normalized("NFC", out)


@settings(max_examples=300, deadline=None)
@given(_texts)
def test_lines_have_no_edge_whitespace(text):
    for line in normalize_text(text).split("\n"):
        assert line == line.strip()
