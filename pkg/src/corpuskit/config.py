"""Declarative run configuration shared by every CLI subcommand.

One YAML file names the sources (with priorities and paths), the seeds, the
filter thresholds, and the audit settings; subcommand flags override
individual values. All paths inside the file resolve relative to the file
itself so a config travels with its fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from corpuskit.dedup import DedupConfig
from corpuskit.documents import SourceSpec, validate_sources
from corpuskit.filtering import (
    ConstantQualityScorer,
    FilterThresholds,
    HeuristicQualityScorer,
)
from corpuskit.langid import ConstantClassifier, TrigramLanguageClassifier
from corpuskit.scorers import CharNgramScorer, HttpScorer, PipeScorer, RandomScorer

ERROR_POLICIES = ("abort", "skip")


class ConfigError(Exception):
    """The config file is missing, malformed, or references absent files."""


@dataclass(frozen=True)
class ContaminationConfig:
    max_n: int = 64
    backend: str = "exact"
    stopwords: Path | None = None
    capacity: int = 1_000_000
    fpr: float = 1e-6
    stage: str = "train"
    save_index: bool = False


@dataclass(frozen=True)
class EvalConfig:
    tasks: tuple[Path, ...]
    scorer: Mapping[str, Any]
    length_normalize: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, with paths already resolved."""

    base_dir: Path
    seed: int
    error_policy: str
    sources: tuple[SourceSpec, ...]
    source_paths: Mapping[str, Path]
    dedup: DedupConfig
    thresholds: FilterThresholds
    langid: Mapping[str, Any]
    quality: Mapping[str, Any]
    test_fraction: float = 0.01
    dev_fraction: float = 0.01
    token_vocab: Path | None = None
    contamination: ContaminationConfig = field(default_factory=ContaminationConfig)
    evaluate: EvalConfig | None = None
    carbon_ledger: Path | None = None
    snapshot: Mapping[str, Any] = field(default_factory=dict)

    def require_sources(self) -> tuple[SourceSpec, ...]:
        if not self.sources:
            raise ConfigError("this subcommand needs a 'sources' section in the config")
        return self.sources


def _require_mapping(value: Any, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value


def _reject_unknown(section: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")


def _resolve(base_dir: Path, value: Any, where: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where} must be a non-empty path string")
    return (base_dir / value).resolve()


def _parse_sources(
    raw: Any, base_dir: Path
) -> tuple[tuple[SourceSpec, ...], dict[str, Path]]:
    if raw is None:
        return (), {}
    if not isinstance(raw, list) or not all(isinstance(s, dict) for s in raw):
        raise ConfigError("sources must be a list of mappings")
    specs = []
    paths: dict[str, Path] = {}
    for i, entry in enumerate(raw):
        where = f"sources[{i}]"
        _reject_unknown(entry, ("name", "priority", "path", "paragraph_dedup"), where)
        try:
            spec = SourceSpec(
                name=entry["name"],
                priority=int(entry["priority"]),
                paragraph_dedup=bool(entry.get("paragraph_dedup", False)),
            )
        except KeyError as exc:
            raise ConfigError(f"{where} is missing required key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        specs.append(spec)
        paths[spec.name] = _resolve(base_dir, entry.get("path"), f"{where}.path")
    try:
        ordered = validate_sources(specs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return tuple(ordered), paths


def _parse_classifier_spec(
    raw: Any, base_dir: Path, where: str, kinds: Mapping[str, Sequence[str]], default: dict
) -> dict:
    section = _require_mapping(raw, where)
    if not section:
        return default
    kind = section.get("kind")
    if kind not in kinds:
        raise ConfigError(f"{where}.kind must be one of {sorted(kinds)}, got {kind!r}")
    _reject_unknown(section, ("kind", *kinds[kind]), where)
    spec = dict(section)
    for key in kinds[kind]:
        if key in spec and key in ("target", "other", "train", "path"):
            spec[key] = _resolve(base_dir, spec[key], f"{where}.{key}")
    return spec


def _parse_fraction(section: Mapping[str, Any], key: str, default: float) -> float:
    value = section.get(key, default)
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"split.{key} must be a number") from exc
    if not 0.0 <= value < 1.0:
        raise ConfigError(f"split.{key} must be in [0, 1)")
    return value


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    """Parse and validate a run config, resolving all paths.

    ``seed_override`` replaces the file's seed before any defaults derived
    from it are computed, so one flag moves every seeded stage together.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    base_dir = path.parent.resolve()
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    raw = _require_mapping(raw, "config")
    _reject_unknown(
        raw,
        ("seed", "error_policy", "sources", "dedup", "filter", "split", "stats",
         "contamination", "evaluate", "carbon"),
        "config",
    )

    seed = seed_override if seed_override is not None else int(raw.get("seed", 0))
    error_policy = raw.get("error_policy", "abort")
    if error_policy not in ERROR_POLICIES:
        raise ConfigError(f"error_policy must be one of {ERROR_POLICIES}, got {error_policy!r}")

    sources, source_paths = _parse_sources(raw.get("sources"), base_dir)

    dedup_section = _require_mapping(raw.get("dedup"), "dedup")
    _reject_unknown(
        dedup_section,
        ("expected_docs", "target_fpr", "paragraphs_per_doc", "min_paragraphs",
         "seed", "m_bits", "hash_count"),
        "dedup",
    )
    try:
        dedup = DedupConfig(**{"seed": seed, **dedup_section})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dedup: {exc}") from exc

    filter_section = _require_mapping(raw.get("filter"), "filter")
    _reject_unknown(filter_section, ("thresholds", "langid", "quality"), "filter")
    try:
        thresholds = FilterThresholds.from_mapping(
            _require_mapping(filter_section.get("thresholds"), "filter.thresholds")
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"filter.thresholds: {exc}") from exc
    langid = _parse_classifier_spec(
        filter_section.get("langid"),
        base_dir,
        "filter.langid",
        {"trigram": ("target", "other"), "constant": ("value",)},
        {"kind": "constant", "value": 1.0},
    )
    quality = _parse_classifier_spec(
        filter_section.get("quality"),
        base_dir,
        "filter.quality",
        {"heuristic": (), "constant": ("value",)},
        {"kind": "heuristic"},
    )

    split_section = _require_mapping(raw.get("split"), "split")
    _reject_unknown(split_section, ("test_fraction", "dev_fraction"), "split")
    test_fraction = _parse_fraction(split_section, "test_fraction", 0.01)
    dev_fraction = _parse_fraction(split_section, "dev_fraction", 0.01)

    stats_section = _require_mapping(raw.get("stats"), "stats")
    _reject_unknown(stats_section, ("token_vocab",), "stats")
    token_vocab = None
    if stats_section.get("token_vocab") is not None:
        token_vocab = _resolve(base_dir, stats_section["token_vocab"], "stats.token_vocab")

    contamination_section = _require_mapping(raw.get("contamination"), "contamination")
    _reject_unknown(
        contamination_section,
        ("max_n", "backend", "stopwords", "capacity", "fpr", "stage", "save_index"),
        "contamination",
    )
    if contamination_section.get("stopwords") is not None:
        contamination_section = dict(contamination_section)
        contamination_section["stopwords"] = _resolve(
            base_dir, contamination_section["stopwords"], "contamination.stopwords"
        )
    try:
        contamination = ContaminationConfig(**contamination_section)
    except TypeError as exc:
        raise ConfigError(f"contamination: {exc}") from exc
    if contamination.backend not in ("exact", "bloom"):
        raise ConfigError("contamination.backend must be 'exact' or 'bloom'")
    if contamination.stage not in ("train", "filtered"):
        raise ConfigError("contamination.stage must be 'train' or 'filtered'")

    evaluate = None
    if raw.get("evaluate") is not None:
        eval_section = _require_mapping(raw.get("evaluate"), "evaluate")
        _reject_unknown(eval_section, ("tasks", "scorer", "length_normalize"), "evaluate")
        tasks_raw = eval_section.get("tasks")
        if not isinstance(tasks_raw, list) or not tasks_raw:
            raise ConfigError("evaluate.tasks must be a non-empty list of task files")
        tasks = tuple(
            _resolve(base_dir, t, f"evaluate.tasks[{i}]") for i, t in enumerate(tasks_raw)
        )
        scorer = _parse_classifier_spec(
            eval_section.get("scorer"),
            base_dir,
            "evaluate.scorer",
            {
                "char-ngram": ("train", "order"),
                "random": ("seed",),
                "pipe": ("argv",),
                "http": ("url", "timeout"),
            },
            {"kind": "random", "seed": seed},
        )
        evaluate = EvalConfig(
            tasks=tasks,
            scorer=scorer,
            length_normalize=bool(eval_section.get("length_normalize", False)),
        )

    carbon_section = _require_mapping(raw.get("carbon"), "carbon")
    _reject_unknown(carbon_section, ("ledger",), "carbon")
    carbon_ledger = None
    if carbon_section.get("ledger") is not None:
        carbon_ledger = _resolve(base_dir, carbon_section["ledger"], "carbon.ledger")

    return RunConfig(
        base_dir=base_dir,
        seed=seed,
        error_policy=error_policy,
        sources=sources,
        source_paths=source_paths,
        dedup=dedup,
        thresholds=thresholds,
        langid=langid,
        quality=quality,
        test_fraction=test_fraction,
        dev_fraction=dev_fraction,
        token_vocab=token_vocab,
        contamination=contamination,
        evaluate=evaluate,
        carbon_ledger=carbon_ledger,
        snapshot=raw,
    )


def _require_file(path: Path, where: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{where} references missing file: {path}")
    return path


def build_language_classifier(spec: Mapping[str, Any]):
    if spec["kind"] == "trigram":
        return TrigramLanguageClassifier.from_seed_files(
            _require_file(spec["target"], "filter.langid.target"),
            _require_file(spec["other"], "filter.langid.other"),
        )
    return ConstantClassifier(float(spec.get("value", 1.0)))


def build_quality_scorer(spec: Mapping[str, Any]):
    if spec["kind"] == "heuristic":
        return HeuristicQualityScorer()
    return ConstantQualityScorer(float(spec.get("value", 1.0)))


def build_scorer(spec: Mapping[str, Any]):
    kind = spec["kind"]
    if kind == "char-ngram":
        return CharNgramScorer.from_file(
            _require_file(spec["train"], "evaluate.scorer.train"),
            order=int(spec.get("order", 3)),
        )
    if kind == "random":
        return RandomScorer(seed=int(spec.get("seed", 0)))
    if kind == "pipe":
        argv = spec.get("argv")
        if not isinstance(argv, list) or not argv:
            raise ConfigError("evaluate.scorer.argv must be a non-empty list")
        return PipeScorer([str(a) for a in argv])
    if kind == "http":
        return HttpScorer(str(spec["url"]), timeout=float(spec.get("timeout", 30.0)))
    raise ConfigError(f"unknown scorer kind {kind!r}")
