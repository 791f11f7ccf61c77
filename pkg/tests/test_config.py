from pathlib import Path

import pytest

from corpuskit.config import (
    ConfigError,
    build_language_classifier,
    build_quality_scorer,
    build_scorer,
    load_config,
)
from corpuskit.filtering import ConstantQualityScorer, HeuristicQualityScorer
from corpuskit.langid import ConstantClassifier, TrigramLanguageClassifier
from corpuskit.scorers import CharNgramScorer, RandomScorer

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def write_config(tmp_path, body: str) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(body, encoding="utf-8")
    return path


def test_fixture_config_loads():
    config = load_config(FIXTURES / "config.yaml")
    assert [s.name for s in config.sources] == ["curated", "web", "crawl"]
    assert config.sources[2].paragraph_dedup is True
    assert config.source_paths["web"].is_absolute()
    assert config.source_paths["web"].name == "web.jsonl.gz"
    assert config.dedup.seed == config.seed
    assert config.evaluate is not None
    assert config.evaluate.scorer["kind"] == "char-ngram"
    assert config.carbon_ledger == FIXTURES / "carbon_ledger.json"


def test_sources_come_back_priority_ordered(tmp_path):
    config = load_config(
        write_config(
            tmp_path,
            "sources:\n"
            "  - {name: b, priority: 2, path: b.jsonl}\n"
            "  - {name: a, priority: 1, path: a.jsonl}\n",
        )
    )
    assert [s.name for s in config.sources] == ["a", "b"]


def test_seed_override_flows_into_dedup(tmp_path):
    path = write_config(tmp_path, "seed: 3\n")
    assert load_config(path).dedup.seed == 3
    assert load_config(path, seed_override=99).seed == 99
    assert load_config(path, seed_override=99).dedup.seed == 99


def test_explicit_dedup_seed_wins(tmp_path):
    config = load_config(write_config(tmp_path, "seed: 3\ndedup: {seed: 11}\n"))
    assert config.dedup.seed == 11


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "seed: 1\ntypo_section: {}\n"))


def test_unknown_source_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(
            write_config(
                tmp_path, "sources:\n  - {name: a, priority: 1, path: a.jsonl, prio: 2}\n"
            )
        )


def test_duplicate_priority_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(
            write_config(
                tmp_path,
                "sources:\n"
                "  - {name: a, priority: 1, path: a.jsonl}\n"
                "  - {name: b, priority: 1, path: b.jsonl}\n",
            )
        )


def test_bad_error_policy_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "error_policy: ignore\n"))


def test_threshold_overrides_apply(tmp_path):
    config = load_config(
        write_config(tmp_path, "filter:\n  thresholds:\n    min_words: 10\n")
    )
    assert config.thresholds.min_words == 10
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "filter:\n  thresholds:\n    no_such: 1\n"))


def test_fraction_bounds_enforced(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "split: {test_fraction: 1.5}\n"))


def test_contamination_backend_validated(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "contamination: {backend: cuckoo}\n"))


def test_evaluate_defaults_to_seeded_random(tmp_path):
    config = load_config(
        write_config(tmp_path, "seed: 5\nevaluate:\n  tasks: [task.yaml]\n")
    )
    assert config.evaluate.scorer == {"kind": "random", "seed": 5}
    scorer = build_scorer(config.evaluate.scorer)
    assert isinstance(scorer, RandomScorer)


def test_evaluate_needs_tasks(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "evaluate:\n  tasks: []\n"))


def test_builders_produce_expected_types():
    config = load_config(FIXTURES / "config.yaml")
    assert isinstance(build_language_classifier(config.langid), TrigramLanguageClassifier)
    assert isinstance(build_quality_scorer(config.quality), HeuristicQualityScorer)
    assert isinstance(build_scorer(config.evaluate.scorer), CharNgramScorer)
    assert isinstance(build_language_classifier({"kind": "constant", "value": 0.5}), ConstantClassifier)
    assert isinstance(build_quality_scorer({"kind": "constant", "value": 0.5}), ConstantQualityScorer)


def test_builders_check_referenced_files(tmp_path):
    with pytest.raises(ConfigError):
        build_language_classifier(
            {"kind": "trigram", "target": tmp_path / "no.txt", "other": tmp_path / "no2.txt"}
        )
    with pytest.raises(ConfigError):
        build_scorer({"kind": "pipe", "argv": []})
    with pytest.raises(ConfigError):
        build_scorer({"kind": "mystery"})
