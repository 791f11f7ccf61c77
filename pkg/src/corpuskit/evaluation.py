"""Template-driven multiple-choice evaluation with pluggable log-probability scorers.

A task renders each item into a prompt prefix plus one completion candidate
per choice, asks a scorer for the log probability of every candidate, and
picks the argmax. In ``label`` answer mode the candidates are the choice
labels ("A", "B", ...); in ``continuation`` mode they are the choice texts
themselves. Few-shot prompts prepend fully answered items drawn from a
dedicated shot pool that never overlaps the scored items.
"""

from __future__ import annotations

import json
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

log = logging.getLogger(__name__)

ANSWER_MODES = ("label", "continuation")
METRIC_NAMES = ("accuracy", "micro_f1", "macro_f1_subset")


class EvalError(Exception):
    """Invalid task configuration or unusable evaluation input."""


class TemplateError(EvalError):
    """A template placeholder could not be filled from the item."""


@dataclass(frozen=True)
class EvalItem:
    question: str
    choices: tuple[str, ...]
    gold: int
    context: str | None = None
    category: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "choices", tuple(self.choices))
        if len(self.choices) < 2:
            raise ValueError(f"item needs at least 2 choices, got {len(self.choices)}")
        if not 0 <= self.gold < len(self.choices):
            raise ValueError(f"gold index {self.gold} out of range for {len(self.choices)} choices")


@dataclass(frozen=True)
class PromptTemplate:
    item_format: str
    header: str | None = None
    choice_labels: tuple[str, ...] = ("A", "B", "C", "D")
    answer_mode: str = "label"

    def __post_init__(self) -> None:
        object.__setattr__(self, "choice_labels", tuple(self.choice_labels))
        if self.answer_mode not in ANSWER_MODES:
            raise ValueError(f"answer_mode must be one of {ANSWER_MODES}, got {self.answer_mode!r}")
        if "{answer}" not in self.item_format:
            raise ValueError("item_format must contain the {answer} placeholder")


@dataclass(frozen=True)
class Metric:
    name: str
    labels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}")
        if self.name == "macro_f1_subset":
            if not self.labels:
                raise ValueError("macro_f1_subset needs a non-empty label subset")
            object.__setattr__(self, "labels", tuple(self.labels))
        elif self.labels is not None:
            raise ValueError(f"metric {self.name} does not take a label subset")


@dataclass(frozen=True)
class ScoredChoice:
    choice_index: int
    logprob: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.logprob):
            raise ValueError(f"choice {self.choice_index}: logprob must be finite")


class Scorer(Protocol):
    concurrency_safe: bool

    def logprob(self, prefix: str, completion: str) -> float: ...


@dataclass
class EvalTask:
    name: str
    template: PromptTemplate
    n_shots: int
    metric: Metric
    items: list[EvalItem]
    shot_pool: list[EvalItem] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n_shots < 0:
            raise ValueError("n_shots must be non-negative")
        if self.n_shots > len(self.shot_pool):
            raise EvalError(
                f"task {self.name}: n_shots={self.n_shots} exceeds shot pool size {len(self.shot_pool)}"
            )
        pool = set(self.shot_pool)
        for item in self.items:
            if len(item.choices) > 4:
                raise ValueError(f"task {self.name}: items are limited to 2-4 choices")
            if item in pool:
                raise EvalError(f"task {self.name}: shot pool overlaps the scored items")
        if self.template.answer_mode == "label":
            max_choices = max((len(i.choices) for i in self.items), default=0)
            if len(self.template.choice_labels) < max_choices:
                raise ValueError(
                    f"task {self.name}: {max_choices} choices need at least as many choice labels"
                )
        if self.metric.name == "macro_f1_subset":
            n_choices = {len(i.choices) for i in self.items}
            if len(n_choices) > 1:
                raise EvalError(
                    f"task {self.name}: macro_f1_subset needs a fixed choice set across items"
                )
            if self.items and max(self.metric.labels) >= n_choices.pop():
                raise EvalError(f"task {self.name}: metric label subset out of choice range")


class _ItemFields(dict):
    def __missing__(self, key: str):
        raise TemplateError(f"template placeholder {{{key}}} has no value for this item")


def _choices_block(template: PromptTemplate, item: EvalItem) -> str:
    return "\n".join(
        f"{template.choice_labels[i]}. {choice}" for i, choice in enumerate(item.choices)
    )


def _answer_text(template: PromptTemplate, item: EvalItem) -> str:
    if template.answer_mode == "label":
        return " " + template.choice_labels[item.gold]
    return " " + item.choices[item.gold]


def render_item(template: PromptTemplate, item: EvalItem, with_answer: bool) -> str:
    """Fill the per-item format; the answer slot stays empty for the item under test."""
    values = _ItemFields(
        question=item.question,
        answer=_answer_text(template, item) if with_answer else "",
    )
    if item.context is not None:
        values["context"] = item.context
    if template.answer_mode == "label":
        values["choices"] = _choices_block(template, item)
    return template.item_format.format_map(values)


def build_prompt(task: EvalTask, item: EvalItem, shots: Sequence[EvalItem]) -> tuple[str, list[str]]:
    """Render the scoring prefix and the per-choice completion candidates."""
    if len(shots) != task.n_shots:
        raise EvalError(f"task {task.name}: expected {task.n_shots} shots, got {len(shots)}")
    for shot in shots:
        if shot == item:
            raise EvalError(f"task {task.name}: item appears in its own prompt shots")
    template = task.template
    parts = [template.header] if template.header else []
    parts += [render_item(template, shot, with_answer=True) for shot in shots]
    parts.append(render_item(template, item, with_answer=False))
    prefix = "\n\n".join(parts)
    if template.answer_mode == "label":
        candidates = [" " + template.choice_labels[i] for i in range(len(item.choices))]
    else:
        candidates = [" " + choice for choice in item.choices]
    return prefix, candidates


def select_shots(task: EvalTask, seed: int) -> list[EvalItem]:
    """First n_shots of the shot pool under a seeded shuffle, fixed for a whole run."""
    pool = list(task.shot_pool)
    random.Random(seed).shuffle(pool)
    return pool[: task.n_shots]


def score_item(
    prefix: str,
    candidates: Sequence[str],
    scorer: Scorer,
    length_normalize: bool = False,
) -> list[ScoredChoice]:
    """Score every candidate; non-finite scorer output raises and marks the item unscored."""
    scored = []
    for index, candidate in enumerate(candidates):
        value = float(scorer.logprob(prefix, candidate))
        if length_normalize:
            value /= max(len(candidate), 1)
        scored.append(ScoredChoice(choice_index=index, logprob=value))
    return scored


def select_answer(scored: Sequence[ScoredChoice]) -> int:
    """Index of the highest-scoring choice; ties go to the lowest index."""
    if not scored:
        raise EvalError("cannot select an answer from no scored choices")
    best = scored[0]
    for choice in scored[1:]:
        if choice.logprob > best.logprob:
            best = choice
    return best.choice_index


def _f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    if denominator == 0:
        return 0.0
    return 2 * tp / denominator


def compute_metric(preds: Sequence[int], golds: Sequence[int], metric: Metric) -> float:
    """Metric value as a percentage over aligned prediction/gold pairs."""
    if len(preds) != len(golds):
        raise EvalError("predictions and golds differ in length")
    if not preds:
        raise EvalError("metric undefined on empty input")
    if metric.name == "accuracy":
        return 100.0 * sum(p == g for p, g in zip(preds, golds)) / len(preds)
    classes = sorted(set(preds) | set(golds))
    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    for pred, gold in zip(preds, golds):
        if pred == gold:
            tp[pred] += 1
        else:
            fp[pred] += 1
            fn[gold] += 1
    if metric.name == "micro_f1":
        # Single-label multiclass micro averaging pools all decisions.
        return 100.0 * _f1(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    scores = [_f1(tp.get(c, 0), fp.get(c, 0), fn.get(c, 0)) for c in metric.labels]
    return 100.0 * sum(scores) / len(scores)


def aggregate_by_category(
    preds: Sequence[int],
    golds: Sequence[int],
    categories: Sequence[str | None],
    metric: Metric | None = None,
) -> dict[str, float]:
    """Per-category metric plus an unweighted ``average`` entry."""
    metric = metric or Metric("accuracy")
    if not (len(preds) == len(golds) == len(categories)):
        raise EvalError("predictions, golds, and categories differ in length")
    groups: dict[str, tuple[list[int], list[int]]] = {}
    for pred, gold, category in zip(preds, golds, categories):
        if category is None:
            raise EvalError("every item must be mapped to a category")
        groups.setdefault(category, ([], []))
        groups[category][0].append(pred)
        groups[category][1].append(gold)
    out = {name: compute_metric(p, g, metric) for name, (p, g) in groups.items()}
    out["average"] = sum(out.values()) / len(out)
    return out


@dataclass
class TaskResult:
    task_name: str
    metric_name: str
    value: float | None
    n_items: int
    n_scored: int
    n_unscored: int
    predictions: list[int | None]
    by_category: dict[str, float] | None = None

    def to_json_dict(self) -> dict:
        return {
            "task": self.task_name,
            "metric": self.metric_name,
            "value": self.value,
            "items": self.n_items,
            "scored": self.n_scored,
            "unscored": self.n_unscored,
            "by_category": self.by_category,
        }


def run_task(
    task: EvalTask,
    scorer: Scorer,
    seed: int = 0,
    length_normalize: bool = False,
    jobs: int = 1,
) -> TaskResult:
    """Evaluate the whole task with one fixed shot selection.

    Items whose scoring raises are excluded from the metric and counted as
    unscored. Concurrent scoring is only used when the scorer declares itself
    safe for it; results are order-stable either way.
    """
    shots = select_shots(task, seed)
    prompts = [build_prompt(task, item, shots) for item in task.items]

    def _score(prompt: tuple[str, list[str]]) -> int | None:
        prefix, candidates = prompt
        try:
            return select_answer(score_item(prefix, candidates, scorer, length_normalize))
        except Exception:
            log.exception("scorer failed; marking item unscored")
            return None

    concurrency_safe = getattr(scorer, "concurrency_safe", False)
    if jobs > 1 and concurrency_safe:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            predictions = list(pool.map(_score, prompts))
    else:
        predictions = [_score(p) for p in prompts]

    scored_pairs = [
        (pred, item.gold, item.category)
        for pred, item in zip(predictions, task.items)
        if pred is not None
    ]
    n_unscored = len(task.items) - len(scored_pairs)
    if n_unscored:
        log.warning("task %s: %d of %d items unscored", task.name, n_unscored, len(task.items))
    value = None
    by_category = None
    if scored_pairs:
        preds = [p for p, _, _ in scored_pairs]
        golds = [g for _, g, _ in scored_pairs]
        value = compute_metric(preds, golds, task.metric)
        categories = [c for _, _, c in scored_pairs]
        if all(c is not None for c in categories) and categories:
            by_category = aggregate_by_category(preds, golds, categories, task.metric)
    return TaskResult(
        task_name=task.name,
        metric_name=task.metric.name,
        value=value,
        n_items=len(task.items),
        n_scored=len(scored_pairs),
        n_unscored=n_unscored,
        predictions=predictions,
        by_category=by_category,
    )


def load_items(path: str | Path) -> list[EvalItem]:
    """Read items from a line-delimited JSON file."""
    items = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append(
                    EvalItem(
                        question=obj["question"],
                        choices=tuple(obj["choices"]),
                        gold=int(obj["gold"]),
                        context=obj.get("context"),
                        category=obj.get("category"),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise EvalError(f"{path}:{line_number}: bad item: {exc}") from exc
    return items


def _resolve_metric(raw: object, items: list[EvalItem]) -> Metric:
    if isinstance(raw, str):
        return Metric(raw)
    if isinstance(raw, Mapping):
        name = raw.get("name")
        labels = raw.get("labels")
        if name != "macro_f1_subset" or not isinstance(labels, list):
            raise EvalError(f"bad metric spec: {raw!r}")
        if all(isinstance(l, int) for l in labels):
            return Metric(name, tuple(labels))
        # String labels are resolved against the (shared) choice list.
        if not items:
            raise EvalError("cannot resolve string metric labels without items")
        choices = items[0].choices
        try:
            return Metric(name, tuple(choices.index(l) for l in labels))
        except ValueError as exc:
            raise EvalError(f"metric label not among item choices: {exc}") from exc
    raise EvalError(f"bad metric spec: {raw!r}")


def load_task(path: str | Path) -> EvalTask:
    """Load a task definition file (YAML or JSON) and its item files."""
    import yaml

    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, Mapping):
        raise EvalError(f"{path}: task definition must be a mapping")
    try:
        template_raw = raw["template"]
        template = PromptTemplate(
            item_format=template_raw["item_format"],
            header=template_raw.get("header"),
            choice_labels=tuple(template_raw.get("choice_labels", ("A", "B", "C", "D"))),
            answer_mode=template_raw.get("answer_mode", "label"),
        )
        items = load_items(path.parent / raw["items"])
        shot_pool = load_items(path.parent / raw["shot_pool"]) if raw.get("shot_pool") else []
        return EvalTask(
            name=raw["name"],
            template=template,
            n_shots=int(raw.get("n_shots", 0)),
            metric=_resolve_metric(raw.get("metric", "accuracy"), items),
            items=items,
            shot_pool=shot_pool,
        )
    except KeyError as exc:
        raise EvalError(f"{path}: missing task key {exc}") from exc
