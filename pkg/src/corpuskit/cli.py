"""Command line entry point tying the pipeline stages and audits together.

Every subcommand reads the same YAML config, writes its artifacts under a
shared work directory, and updates ``run_manifest.json`` there with digests
of everything it read and wrote. Exit codes: 0 on success, 1 on data errors
under the abort policy, 2 on usage or config problems.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Mapping, Sequence

from corpuskit import __version__
from corpuskit.carbon import format_report, ledger_total, load_ledger
from corpuskit.config import (
    ConfigError,
    RunConfig,
    build_language_classifier,
    build_quality_scorer,
    build_scorer,
    load_config,
)
from corpuskit.contamination import (
    AuditTokenizer,
    NGramIndex,
    contamination_report,
)
from corpuskit.dedup import DedupEngine
from corpuskit.documents import (
    Document,
    ReadErrors,
    read_documents,
    write_documents,
)
from corpuskit.evaluation import load_task, run_task
from corpuskit.filtering import (
    ClassifierErrors,
    apply_filters,
    filter_report,
    tag_document,
)
from corpuskit.manifest import RunManifest
from corpuskit.normalize import normalize_document
from corpuskit.splitting import SPLIT_PRNG, derive_seed, split_source
from corpuskit.stats import StageCount, VocabTokenCounter, collect_counts, stage_stats

log = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
NORMALIZED_DIR = "normalized"
DEDUPED_DIR = "deduped"
FILTERED_DIR = "filtered"
SPLITS_DIR = "splits"
SPLIT_FILES = ("train", "dev", "test")


def _relabel(path: Path, base: Path) -> str:
    return os.path.relpath(path, base)


def _open_manifest(workdir: Path, config: RunConfig) -> RunManifest:
    return RunManifest.open_or_create(
        workdir / MANIFEST_NAME, config.seed, SPLIT_PRNG, config.snapshot
    )


def _save_manifest(manifest: RunManifest, workdir: Path) -> None:
    manifest.save(workdir / MANIFEST_NAME)


def _read_corpus(path: Path, policy: str) -> tuple[list[Document], ReadErrors]:
    errors = ReadErrors()
    docs = list(read_documents(path, skip_malformed=(policy == "skip"), errors=errors))
    if errors.count:
        log.warning("%s: skipped %d malformed lines", path, errors.count)
    return docs, errors


def _stage_file(workdir: Path, stage_dir: str, name: str) -> Path:
    return workdir / stage_dir / f"{name}.jsonl"


def _read_stage(
    workdir: Path, stage_dir: str, names: Sequence[str], policy: str, produced_by: str
) -> dict[str, list[Document]]:
    docs: dict[str, list[Document]] = {}
    for name in names:
        path = _stage_file(workdir, stage_dir, name)
        if not path.is_file():
            raise ConfigError(
                f"missing {path}; run the {produced_by!r} subcommand first"
            )
        docs[name], _ = _read_corpus(path, policy)
    return docs


def _write_json(path: Path, payload: object) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_jsonl(path: Path, records: Sequence[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


# --- stages ---


def _run_normalize(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    sources = config.require_sources()
    out_dir = workdir / NORMALIZED_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs: dict[str, Path] = {}
    outputs: dict[str, Path] = {}
    for spec in sources:
        raw_path = config.source_paths[spec.name]
        if not raw_path.is_file():
            raise ConfigError(f"source {spec.name!r} references missing file: {raw_path}")
        docs, _ = _read_corpus(raw_path, config.error_policy)
        normalized = [normalize_document(doc) for doc in docs]
        out_path = out_dir / f"{spec.name}.jsonl"
        write_documents(normalized, out_path)
        inputs[_relabel(raw_path, config.base_dir)] = raw_path
        outputs[_relabel(out_path, workdir)] = out_path
        print(f"normalize[{spec.name}]: {len(normalized)} documents")
    manifest.record_stage("normalize", inputs, outputs)


def _run_dedup(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    sources = config.require_sources()
    names = [spec.name for spec in sources]
    docs = _read_stage(workdir, NORMALIZED_DIR, names, config.error_policy, "normalize")
    engine = DedupEngine(sources, config.dedup)
    survivors: dict[str, list[Document]] = {name: [] for name in names}
    decisions = []
    for spec, doc, decision in engine.process(docs):
        if doc is not None:
            survivors[spec.name].append(doc)
        decisions.append(decision)

    out_dir = workdir / DEDUPED_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {
        _relabel(_stage_file(workdir, NORMALIZED_DIR, n), workdir): _stage_file(
            workdir, NORMALIZED_DIR, n
        )
        for n in names
    }
    outputs: dict[str, Path] = {}
    for name in names:
        out_path = out_dir / f"{name}.jsonl"
        write_documents(survivors[name], out_path)
        outputs[_relabel(out_path, workdir)] = out_path
        dropped = len(docs[name]) - len(survivors[name])
        print(f"dedup[{name}]: kept {len(survivors[name])}, dropped {dropped}")
    decisions_path = workdir / "dedup_decisions.jsonl"
    _write_jsonl(decisions_path, [d.to_record() for d in decisions])
    outputs[_relabel(decisions_path, workdir)] = decisions_path
    manifest.bloom = engine.filter_parameters()
    manifest.record_stage("dedup", inputs, outputs)


def _run_filter(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    sources = config.require_sources()
    names = [spec.name for spec in sources]
    docs = _read_stage(workdir, DEDUPED_DIR, names, config.error_policy, "dedup")
    lang_id = build_language_classifier(config.langid)
    quality = build_quality_scorer(config.quality)
    errors = ClassifierErrors()

    out_dir = workdir / FILTERED_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {
        _relabel(_stage_file(workdir, DEDUPED_DIR, n), workdir): _stage_file(
            workdir, DEDUPED_DIR, n
        )
        for n in names
    }
    outputs: dict[str, Path] = {}
    verdicts_by_source: dict[str, list] = {}
    verdict_records = []
    for name in names:
        kept_docs = []
        verdicts = []
        for doc in docs[name]:
            tags = tag_document(doc, lang_id, quality, errors)
            verdict = apply_filters(tags, config.thresholds, doc_id=doc.id)
            verdicts.append(verdict)
            verdict_records.append({"source": name, **verdict.to_record()})
            if verdict.kept:
                kept_docs.append(doc)
        verdicts_by_source[name] = verdicts
        out_path = out_dir / f"{name}.jsonl"
        write_documents(kept_docs, out_path)
        outputs[_relabel(out_path, workdir)] = out_path
        print(f"filter[{name}]: kept {len(kept_docs)} of {len(verdicts)}")
    if errors.count:
        print(f"filter: {errors.count} classifier failures scored as 0")

    report = filter_report(verdicts_by_source)
    tsv_path = workdir / "filter_report.tsv"
    json_path = workdir / "filter_report.json"
    tsv_path.write_text(report.to_tsv(), encoding="utf-8")
    _write_json(json_path, report.to_json_dict())
    verdicts_path = workdir / "filter_verdicts.jsonl"
    _write_jsonl(verdicts_path, verdict_records)
    for path in (tsv_path, json_path, verdicts_path):
        outputs[_relabel(path, workdir)] = path
    print(report.to_tsv(), end="")
    manifest.record_stage("filter", inputs, outputs)


def _run_split(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    sources = config.require_sources()
    names = [spec.name for spec in sources]
    docs = _read_stage(workdir, FILTERED_DIR, names, config.error_policy, "filter")

    out_dir = workdir / SPLITS_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {
        _relabel(_stage_file(workdir, FILTERED_DIR, n), workdir): _stage_file(
            workdir, FILTERED_DIR, n
        )
        for n in names
    }
    outputs: dict[str, Path] = {}
    assignment_records = []
    for name in names:
        seed = derive_seed(config.seed, name)
        train, dev, test = split_source(
            docs[name], seed, config.test_fraction, config.dev_fraction
        )
        for split_name, split_docs in zip(SPLIT_FILES, (train, dev, test)):
            out_path = out_dir / f"{name}.{split_name}.jsonl"
            write_documents(split_docs, out_path)
            outputs[_relabel(out_path, workdir)] = out_path
            for doc in split_docs:
                assignment_records.append(
                    {"doc_id": doc.id, "source": name, "split": split_name, "seed": seed}
                )
        print(
            f"split[{name}]: train {len(train)}, dev {len(dev)}, test {len(test)}"
        )
    assignments_path = workdir / "split_assignments.jsonl"
    _write_jsonl(assignments_path, assignment_records)
    outputs[_relabel(assignments_path, workdir)] = assignments_path
    manifest.record_stage("split", inputs, outputs)


def _run_stats(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    sources = config.require_sources()
    names = [spec.name for spec in sources]
    token_counter = None
    if config.token_vocab is not None:
        if not config.token_vocab.is_file():
            raise ConfigError(f"stats.token_vocab references missing file: {config.token_vocab}")
        token_counter = VocabTokenCounter.from_file(config.token_vocab)

    inputs: dict[str, Path] = {}
    stage_sources: dict[str, dict[str, StageCount]] = {}

    raw_counts: dict[str, StageCount] = {}
    for spec in sources:
        raw_path = config.source_paths[spec.name]
        if raw_path.is_file():
            docs, _ = _read_corpus(raw_path, config.error_policy)
            raw_counts[spec.name] = collect_counts(docs, token_counter)
            inputs[_relabel(raw_path, config.base_dir)] = raw_path
    if raw_counts:
        stage_sources["raw"] = raw_counts

    for stage, stage_dir in (
        ("normalized", NORMALIZED_DIR),
        ("deduped", DEDUPED_DIR),
        ("filtered", FILTERED_DIR),
    ):
        counts: dict[str, StageCount] = {}
        for name in names:
            path = _stage_file(workdir, stage_dir, name)
            if path.is_file():
                docs, _ = _read_corpus(path, config.error_policy)
                counts[name] = collect_counts(docs, token_counter)
                inputs[_relabel(path, workdir)] = path
        if counts:
            stage_sources[stage] = counts

    if not stage_sources:
        raise ConfigError("no stage outputs found to count; run the pipeline first")

    stats = stage_stats(stage_sources, token_counter)
    tsv_path = workdir / "stats.tsv"
    json_path = workdir / "stats.json"
    tsv_path.write_text(stats.to_tsv(), encoding="utf-8")
    _write_json(json_path, stats.to_json_dict())
    print(stats.to_tsv(), end="")
    manifest.record_stage(
        "stats", inputs, {p.name: p for p in (tsv_path, json_path)}
    )


def _run_contaminate(config: RunConfig, workdir: Path, manifest: RunManifest) -> None:
    if config.evaluate is None:
        raise ConfigError("contaminate needs an 'evaluate' section naming the benchmark tasks")
    sources = config.require_sources()
    names = [spec.name for spec in sources]
    audit = config.contamination

    if audit.stage == "train":
        corpus_files = [
            workdir / SPLITS_DIR / f"{name}.train.jsonl" for name in names
        ]
        produced_by = "split"
    else:
        corpus_files = [_stage_file(workdir, FILTERED_DIR, name) for name in names]
        produced_by = "filter"
    for path in corpus_files:
        if not path.is_file():
            raise ConfigError(f"missing {path}; run the {produced_by!r} subcommand first")

    if audit.stopwords is not None:
        if not audit.stopwords.is_file():
            raise ConfigError(
                f"contamination.stopwords references missing file: {audit.stopwords}"
            )
        tokenizer = AuditTokenizer.from_files(audit.stopwords)
    else:
        tokenizer = AuditTokenizer()

    index = NGramIndex(
        tokenizer,
        max_n=audit.max_n,
        backend=audit.backend,
        capacity=audit.capacity,
        fpr=audit.fpr,
    )
    inputs: dict[str, Path] = {}
    for path in corpus_files:
        docs, _ = _read_corpus(path, config.error_policy)
        for doc in docs:
            index.add_document(doc.text)
        inputs[_relabel(path, workdir)] = path

    tasks = []
    for task_path in config.evaluate.tasks:
        if not task_path.is_file():
            raise ConfigError(f"evaluate.tasks references missing file: {task_path}")
        tasks.append(load_task(task_path))
        inputs[_relabel(task_path, config.base_dir)] = task_path

    report = contamination_report(tasks, index)
    tsv_path = workdir / "contamination_report.tsv"
    json_path = workdir / "contamination_report.json"
    tsv_path.write_text(report.to_tsv(), encoding="utf-8")
    _write_json(json_path, report.to_json_dict())
    outputs = {p.name: p for p in (tsv_path, json_path)}
    if audit.save_index:
        index_path = workdir / "ngram_index.bin"
        index.save(index_path)
        outputs[index_path.name] = index_path
    print(report.to_tsv(), end="")
    manifest.tokenizer_fingerprint = tokenizer.fingerprint
    manifest.record_stage("contaminate", inputs, outputs)


def _run_evaluate(
    config: RunConfig,
    workdir: Path,
    manifest: RunManifest,
    jobs: int,
    length_normalize: bool | None,
) -> None:
    if config.evaluate is None:
        raise ConfigError("evaluate needs an 'evaluate' section in the config")
    normalize = (
        config.evaluate.length_normalize if length_normalize is None else length_normalize
    )
    inputs: dict[str, Path] = {}
    tasks = []
    for task_path in config.evaluate.tasks:
        if not task_path.is_file():
            raise ConfigError(f"evaluate.tasks references missing file: {task_path}")
        tasks.append(load_task(task_path))
        inputs[_relabel(task_path, config.base_dir)] = task_path

    scorer = build_scorer(config.evaluate.scorer)
    results = []
    with contextlib.ExitStack() as stack:
        if hasattr(scorer, "close"):
            stack.callback(scorer.close)
        for task in tasks:
            results.append(
                run_task(task, scorer, seed=config.seed, length_normalize=normalize, jobs=jobs)
            )

    lines = ["task\tmetric\tvalue\tn_items\tn_scored\tn_unscored"]
    for result in results:
        value = "-" if result.value is None else f"{result.value:.2f}"
        lines.append(
            f"{result.task_name}\t{result.metric_name}\t{value}"
            f"\t{result.n_items}\t{result.n_scored}\t{result.n_unscored}"
        )
    tsv = "\n".join(lines) + "\n"
    tsv_path = workdir / "eval_results.tsv"
    json_path = workdir / "eval_results.json"
    tsv_path.write_text(tsv, encoding="utf-8")
    _write_json(json_path, {"results": [r.to_json_dict() for r in results]})
    print(tsv, end="")
    manifest.record_stage(
        "evaluate", inputs, {p.name: p for p in (tsv_path, json_path)}
    )


def _run_carbon(
    config: RunConfig, workdir: Path, manifest: RunManifest, ledger_override: str | None
) -> None:
    if ledger_override is not None:
        ledger_path = Path(ledger_override).resolve()
    elif config.carbon_ledger is not None:
        ledger_path = config.carbon_ledger
    else:
        raise ConfigError("carbon needs either carbon.ledger in the config or --ledger")
    if not ledger_path.is_file():
        raise ConfigError(f"carbon ledger not found: {ledger_path}")

    records = load_ledger(ledger_path)
    total = ledger_total(records)
    print(format_report(records, include_total=True), end="")

    lines = ["label\tgpu_hours\temissions_kg"]
    for record in records:
        lines.append(f"{record.label}\t{record.gpu_hours}\t{record.emissions_kg:.2f}")
    lines.append(f"total\t{total.gpu_hours}\t{total.emissions_kg:.2f}")
    tsv = "\n".join(lines) + "\n"
    tsv_path = workdir / "carbon_report.tsv"
    json_path = workdir / "carbon_report.json"
    tsv_path.write_text(tsv, encoding="utf-8")
    _write_json(
        json_path,
        {
            "rows": [
                {
                    "label": r.label,
                    "gpu_hours": r.gpu_hours,
                    "power_watts": r.power_watts,
                    "intensity_kg_per_kwh": r.intensity_kg_per_kwh,
                    "emissions_kg": r.emissions_kg,
                }
                for r in records
            ],
            "total": {
                "gpu_hours": total.gpu_hours,
                "emissions_kg": total.emissions_kg,
            },
        },
    )
    manifest.record_stage(
        "carbon",
        {_relabel(ledger_path, config.base_dir): ledger_path},
        {p.name: p for p in (tsv_path, json_path)},
    )


# --- subcommand wrappers ---


def _prepare(args: argparse.Namespace) -> tuple[RunConfig, Path, RunManifest]:
    config = load_config(args.config, seed_override=args.seed)
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    manifest = _open_manifest(workdir, config)
    return config, workdir, manifest


def _finish(manifest: RunManifest, workdir: Path) -> int:
    _save_manifest(manifest, workdir)
    return 0


def cmd_normalize(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_normalize(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_dedup(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_dedup(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_filter(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_filter(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_split(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_split(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_stats(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_stats(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_contaminate(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_contaminate(config, workdir, manifest)
    return _finish(manifest, workdir)


def cmd_evaluate(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_evaluate(config, workdir, manifest, args.jobs, args.length_normalize)
    return _finish(manifest, workdir)


def cmd_carbon(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_carbon(config, workdir, manifest, args.ledger)
    return _finish(manifest, workdir)


def cmd_pipeline(args: argparse.Namespace) -> int:
    config, workdir, manifest = _prepare(args)
    _run_normalize(config, workdir, manifest)
    _run_dedup(config, workdir, manifest)
    _run_filter(config, workdir, manifest)
    _run_split(config, workdir, manifest)
    _run_stats(config, workdir, manifest)
    return _finish(manifest, workdir)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", required=True, help="Run config YAML")
    common.add_argument("--workdir", "-w", default="run", help="Artifact directory (default: run)")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed")
    common.add_argument("--jobs", "-j", type=int, default=1, help="Worker cap for parallel stages")

    parser = argparse.ArgumentParser(
        prog="corpuskit",
        description="Corpus pipeline: normalize, dedup, filter, split, and audit.",
    )
    parser.add_argument("--version", action="version", version=f"corpuskit {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, func, help_text in (
        ("normalize", cmd_normalize, "Normalize raw source files"),
        ("dedup", cmd_dedup, "Drop URL/content/paragraph duplicates"),
        ("filter", cmd_filter, "Apply quality filters and write the drop report"),
        ("split", cmd_split, "Seeded per-source train/dev/test split"),
        ("stats", cmd_stats, "Per-stage corpus statistics table"),
        ("pipeline", cmd_pipeline, "Run normalize through stats in order"),
        ("contaminate", cmd_contaminate, "Audit benchmark overlap against the corpus"),
    ):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(func=func)

    evaluate = subparsers.add_parser(
        "evaluate", parents=[common], help="Score benchmark tasks with a log-prob scorer"
    )
    evaluate.add_argument(
        "--length-normalize",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Divide candidate scores by character length (overrides config)",
    )
    evaluate.set_defaults(func=cmd_evaluate)

    carbon = subparsers.add_parser(
        "carbon", parents=[common], help="Emissions report from a GPU-hours ledger"
    )
    carbon.add_argument("--ledger", default=None, help="Ledger file (overrides config)")
    carbon.set_defaults(func=cmd_carbon)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
