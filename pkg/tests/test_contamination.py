import random
import re

import pytest

from corpuskit.contamination import (
    AuditTokenizer,
    NGramIndex,
    TokenizerMismatchError,
    audit_benchmark,
    build_index,
    contamination_report,
    item_audit_text,
    longest_match,
    nearest_rank,
)
from corpuskit.evaluation import EvalItem, EvalTask, Metric, PromptTemplate


def oracle_tokenize(text, stopwords=frozenset()):
    # Reference tokenizer written straight from the contract: lowercase,
    # split on anything that is not a letter or digit, drop stopwords.
    tokens = []
    for raw in re.split(r"[\W_]+", text.lower(), flags=re.UNICODE):
        if raw and raw not in stopwords:
            tokens.append(raw)
    return tokens


def oracle_longest_match(item_tokens, corpus_token_lists, max_n):
    """Exhaustive scan: try every window of every size against every corpus text."""
    corpus_grams = set()
    for tokens in corpus_token_lists:
        for n in range(1, min(max_n, len(tokens)) + 1):
            for i in range(len(tokens) - n + 1):
                corpus_grams.add(tuple(tokens[i : i + n]))
    best = 0
    for n in range(1, min(max_n, len(item_tokens)) + 1):
        for i in range(len(item_tokens) - n + 1):
            if tuple(item_tokens[i : i + n]) in corpus_grams:
                best = max(best, n)
    return best


def make_item(question, choices=("bai", "ez"), gold=0, context=None):
    return EvalItem(question=question, choices=tuple(choices), gold=gold, context=context)


def make_task(name, items):
    template = PromptTemplate(item_format="{question}{answer}", answer_mode="continuation")
    return EvalTask(name=name, template=template, n_shots=0, metric=Metric("accuracy"), items=items)


TOKENIZER = AuditTokenizer()


# --- tokenizer ---


def test_tokenize_lowercases_and_splits():
    assert TOKENIZER.tokenize("Kaixo, Mundua!") == ["kaixo", "mundua"]


def test_tokenize_drops_stopwords_after_lowercasing():
    tok = AuditTokenizer(stopwords=frozenset({"da", "eta"}))
    assert tok.tokenize("Hau DA etxea ETA mendia") == ["hau", "etxea", "mendia"]


def test_tokenize_underscore_is_a_separator():
    assert TOKENIZER.tokenize("foo_bar baz") == ["foo", "bar", "baz"]


def test_tokenize_numbers_kept():
    assert TOKENIZER.tokenize("2021ean 42 aldiz") == ["2021ean", "42", "aldiz"]


def test_tokenize_matches_oracle_on_fixture():
    texts = [
        "Kaixo, mundua! Zer moduz?",
        "punct...everywhere!!! here---too",
        "  \t spaces \n and newlines ",
        "ñandú über café",
        "",
        "a_b_c d_e",
        "123 abc123 1a2b",
    ]
    for text in texts:
        assert TOKENIZER.tokenize(text) == oracle_tokenize(text)


def test_tokenizer_fingerprint_sensitivity():
    base = AuditTokenizer()
    with_stops = AuditTokenizer(stopwords=frozenset({"da"}))
    assert base.fingerprint == AuditTokenizer().fingerprint
    assert base.fingerprint != with_stops.fingerprint


def test_tokenizer_from_files(tmp_path):
    stops = tmp_path / "stop.txt"
    stops.write_text("Da\neta\n\n", encoding="utf-8")
    aux = tmp_path / "aux.txt"
    aux.write_text("izan\n", encoding="utf-8")
    tok = AuditTokenizer.from_files(stops, aux)
    assert tok.stopwords == frozenset({"da", "eta", "izan"})


# --- longest match ---


def test_longest_match_example():
    index = build_index(["red fox jumps"], TOKENIZER, max_n=64)
    assert longest_match(["red", "fox", "jumps", "high"], index) == 3


def test_longest_match_full_containment():
    index = build_index(["oso testu luzea da hau hemen dago"], TOKENIZER, max_n=64)
    tokens = TOKENIZER.tokenize("testu luzea da hau")
    assert longest_match(tokens, index) == 4


def test_longest_match_disjoint_is_zero():
    index = build_index(["bat bi hiru"], TOKENIZER, max_n=64)
    assert longest_match(["zazpi", "zortzi"], index) == 0


def test_longest_match_empty_item():
    index = build_index(["bat bi"], TOKENIZER, max_n=64)
    assert longest_match([], index) == 0


def test_longest_match_capped_at_max_n():
    words = [f"w{i}" for i in range(10)]
    index = build_index([" ".join(words)], TOKENIZER, max_n=4)
    # The true longest shared run is 10, but the index never saw grams past 4.
    assert longest_match(words, index) == 4


def test_longest_match_equals_bruteforce_on_random_corpora():
    rng = random.Random(2024)
    vocab = [f"hitz{i}" for i in range(60)]
    for trial in range(8):
        corpus_texts = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(5, 120)))
            for _ in range(rng.randint(2, 8))
        ]
        max_n = rng.choice([3, 8, 64])
        index = build_index(corpus_texts, TOKENIZER, max_n=max_n)
        corpus_tokens = [TOKENIZER.tokenize(t) for t in corpus_texts]
        for _ in range(40):
            if rng.random() < 0.5:
                # Plant a real overlap of random length inside noise.
                src = rng.choice(corpus_tokens)
                span = rng.randint(1, min(len(src), 12))
                start = rng.randint(0, len(src) - span)
                noise = [rng.choice(["qq", "zz", "xx"]) for _ in range(rng.randint(0, 4))]
                item_tokens = noise + src[start : start + span] + noise
            else:
                item_tokens = [rng.choice(vocab + ["qq", "zz"]) for _ in range(rng.randint(1, 30))]
            expected = oracle_longest_match(item_tokens, corpus_tokens, max_n)
            assert longest_match(item_tokens, index) == expected


def test_match_presence_is_monotone_in_n():
    rng = random.Random(5)
    vocab = [f"t{i}" for i in range(30)]
    corpus = [" ".join(rng.choice(vocab) for _ in range(200))]
    index = build_index(corpus, TOKENIZER, max_n=32)
    tokens = TOKENIZER.tokenize(corpus[0])[40:80]

    def any_window(n):
        return any(index.contains(tokens[i : i + n]) for i in range(len(tokens) - n + 1))

    matched = [any_window(n) for n in range(1, len(tokens) + 1)]
    # Once a size fails, every larger size fails too.
    first_false = matched.index(False) if False in matched else len(matched)
    assert all(matched[:first_false])
    assert not any(matched[first_false:])


# --- index backends and persistence ---


def test_bloom_backend_finds_all_true_matches():
    rng = random.Random(8)
    vocab = [f"hitz{i}" for i in range(40)]
    corpus = [" ".join(rng.choice(vocab) for _ in range(150)) for _ in range(4)]
    exact = build_index(corpus, TOKENIZER, max_n=16, backend="exact")
    bloom = build_index(corpus, TOKENIZER, max_n=16, backend="bloom", capacity=50_000)
    corpus_tokens = [TOKENIZER.tokenize(t) for t in corpus]
    for _ in range(30):
        src = rng.choice(corpus_tokens)
        start = rng.randint(0, len(src) - 6)
        item = src[start : start + 6]
        # No false negatives: bloom answers at least the exact match length.
        assert longest_match(item, bloom) >= longest_match(item, exact)
    assert bloom.expected_fpr() > 0.0
    assert exact.expected_fpr() == 0.0


def test_index_persistence_round_trip(tmp_path):
    index = build_index(["bat bi hiru lau bost"], TOKENIZER, max_n=8)
    path = tmp_path / "ngrams.bin"
    index.save(path)
    loaded = NGramIndex.load(path, TOKENIZER)
    assert loaded.max_n == 8
    assert loaded.ngrams_indexed == index.ngrams_indexed
    assert longest_match(["bi", "hiru", "lau"], loaded) == 3


def test_index_load_rejects_tokenizer_mismatch(tmp_path):
    index = build_index(["bat bi hiru"], TOKENIZER, max_n=8)
    path = tmp_path / "ngrams.bin"
    index.save(path)
    other = AuditTokenizer(stopwords=frozenset({"bat"}))
    with pytest.raises(TokenizerMismatchError):
        NGramIndex.load(path, other)


def test_bloom_index_persistence_round_trip(tmp_path):
    index = build_index(["bat bi hiru lau"], TOKENIZER, max_n=4, backend="bloom", capacity=1000)
    path = tmp_path / "bloom.bin"
    index.save(path)
    loaded = NGramIndex.load(path, TOKENIZER)
    assert loaded.backend == "bloom"
    assert longest_match(["bi", "hiru"], loaded) >= 2


# --- quantiles ---


def test_nearest_rank_quantiles():
    values = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    assert nearest_rank(values, 0.0) == 1
    assert nearest_rank(values, 0.25) == 3
    assert nearest_rank(values, 0.5) == 5
    assert nearest_rank(values, 0.75) == 8
    assert nearest_rank(values, 1.0) == 10


def test_nearest_rank_single_value():
    assert nearest_rank([4], 0.0) == 4
    assert nearest_rank([4], 1.0) == 4


# --- report ---


def oracle_quantile_report(item_token_lists, corpus_token_lists, max_n):
    lengths = sorted(len(t) for t in item_token_lists)
    matches = {
        i: oracle_longest_match(tokens, corpus_token_lists, max_n)
        for i, tokens in enumerate(item_token_lists)
    }
    cells = []
    for q in (0.0, 0.25, 0.5, 0.75, 1.0):
        if q <= 0:
            n_q = lengths[0]
        else:
            import math

            n_q = lengths[math.ceil(q * len(lengths)) - 1]
        eligible = [i for i, tokens in enumerate(item_token_lists) if len(tokens) >= n_q]
        contaminated = [i for i in eligible if matches[i] >= n_q]
        cells.append((n_q, 100.0 * len(contaminated) / len(eligible)))
    return cells


def test_report_matches_bruteforce_oracle():
    rng = random.Random(31)
    vocab = [f"w{i}" for i in range(50)]
    corpus_texts = [" ".join(rng.choice(vocab) for _ in range(400)) for _ in range(5)]
    corpus_tokens = [TOKENIZER.tokenize(t) for t in corpus_texts]
    items = []
    for _ in range(120):
        if rng.random() < 0.4:
            src = rng.choice(corpus_tokens)
            span = rng.randint(2, 20)
            start = rng.randint(0, len(src) - span)
            text = " ".join(src[start : start + span])
        else:
            text = " ".join(rng.choice(vocab + ["qq", "zz"]) for _ in range(rng.randint(2, 30)))
        items.append(make_item(text))
    index = build_index(corpus_texts, TOKENIZER, max_n=64)
    task = make_task("synthetic", items)
    report = contamination_report([task], index)
    (row,) = report.rows
    item_tokens = [TOKENIZER.tokenize(item_audit_text(i)) for i in items]
    expected = oracle_quantile_report(item_tokens, corpus_tokens, 64)
    assert row.items_audited == 120
    for cell, (n_q, pct) in zip(row.cells, expected):
        assert cell.n == n_q
        assert cell.cont_pct == pytest.approx(pct)


def test_fully_contained_benchmark_reports_100():
    # The corpus carries each item's full audit text (context, question, and
    # choices), so every quantile cell must read 100.
    items = [make_item("galdera bat da hau"), make_item("erantzuna ere hemen dago")]
    corpus = [item_audit_text(i) for i in items]
    index = build_index(corpus, TOKENIZER, max_n=64)
    report = contamination_report([make_task("inside", items)], index)
    for cell in report.rows[0].cells:
        assert cell.cont_pct == pytest.approx(100.0)


def test_quantile_near_100_with_one_planted_miss():
    # 19 of 20 equal-length items are verbatim in the corpus; the one planted
    # miss keeps every quantile cell just under 100.
    hits = [make_item(f"gai{i} gauza{i}") for i in range(19)]
    corpus = [item_audit_text(i) for i in hits]
    miss = make_item("rr ss", choices=("qq", "zz"))
    index = build_index(corpus, TOKENIZER, max_n=8)
    report = contamination_report([make_task("near", hits + [miss])], index)
    for cell in report.rows[0].cells:
        assert cell.n == 4
        assert cell.eligible == 20
        assert cell.cont_pct == pytest.approx(95.0)


def test_disjoint_benchmark_reports_0():
    index = build_index(["bat bi hiru lau"], TOKENIZER, max_n=8)
    items = [make_item("zazpi zortzi"), make_item("hamar hamaika hamabi")]
    report = contamination_report([make_task("clean", items)], index)
    for cell in report.rows[0].cells:
        assert cell.cont_pct == 0.0


def test_empty_benchmark_flagged():
    index = build_index(["bat bi"], TOKENIZER, max_n=8)
    task = make_task("empty", [])
    report = contamination_report([task], index)
    assert report.rows[0].empty
    assert "empty\t0" in report.to_tsv()


def test_capped_items_counted():
    words = [f"w{i}" for i in range(12)]
    index = build_index([" ".join(words)], TOKENIZER, max_n=4)
    report = contamination_report([make_task("long", [make_item(" ".join(words))])], index)
    assert report.rows[0].items_capped == 1


def test_item_audit_text_includes_context_question_choices():
    item = make_item("galdera", choices=("aukera bat", "aukera bi"), context="testuingurua")
    text = item_audit_text(item)
    for piece in ("testuingurua", "galdera", "aukera bat", "aukera bi"):
        assert piece in text


def test_report_json_shape():
    index = build_index(["bat bi hiru"], TOKENIZER, max_n=8)
    report = contamination_report([make_task("t", [make_item("bat bi")])], index)
    payload = report.to_json_dict()
    assert payload["max_n"] == 8
    assert payload["benchmarks"][0]["benchmark"] == "t"
    assert len(payload["benchmarks"][0]["quantiles"]) == 5
