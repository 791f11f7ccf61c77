"""Log-probability scorers: a deterministic character model plus external adapters.

External scorers speak one wire format: a JSON request object
``{"prefix": ..., "completion": ...}`` answered by ``{"logprob": ...}``. Over a
subprocess pipe the exchange is line-delimited; over HTTP each exchange is one
POST with a JSON body.
"""

from __future__ import annotations

import json
import logging
import math
import random
import subprocess
import urllib.request
from collections import Counter
from pathlib import Path
from typing import Sequence

log = logging.getLogger(__name__)


class ScorerError(RuntimeError):
    """The scorer could not produce a log probability."""


class CharNgramScorer:
    """Character n-gram language model with add-one smoothing.

    Fully deterministic, which makes it the reference scorer for golden tests
    and offline runs. The completion is scored character by character
    conditioned on the trailing context of the prefix.
    """

    concurrency_safe = True

    def __init__(self, counts: Counter, context_totals: Counter, order: int, alphabet_size: int):
        self.order = order
        self._counts = counts
        self._context_totals = context_totals
        # One extra slot absorbs characters never seen in training.
        self._alphabet_size = alphabet_size + 1

    @classmethod
    def train(cls, text: str, order: int = 3) -> "CharNgramScorer":
        if order < 1:
            raise ValueError("order must be >= 1")
        if len(text) < order:
            raise ValueError("training text shorter than the model order")
        counts: Counter = Counter()
        context_totals: Counter = Counter()
        for i in range(len(text) - order + 1):
            gram = text[i : i + order]
            counts[gram] += 1
            context_totals[gram[:-1]] += 1
        return cls(counts, context_totals, order, len(set(text)))

    @classmethod
    def from_file(cls, path: str | Path, order: int = 3) -> "CharNgramScorer":
        return cls.train(Path(path).read_text(encoding="utf-8"), order)

    def logprob(self, prefix: str, completion: str) -> float:
        context = prefix[-(self.order - 1) :] if self.order > 1 else ""
        total = 0.0
        for ch in completion:
            seen = self._counts.get(context + ch, 0)
            denominator = self._context_totals.get(context, 0) + self._alphabet_size
            total += math.log((seen + 1) / denominator)
            context = (context + ch)[-(self.order - 1) :] if self.order > 1 else ""
        return total


class RandomScorer:
    """I.i.d. uniform scores; useful only for chance-level baselines."""

    concurrency_safe = False

    def __init__(self, seed: int = 0):
        self._rng = random.Random(seed)

    def logprob(self, prefix: str, completion: str) -> float:
        return self._rng.random()


class PipeScorer:
    """Adapter for a scorer subprocess speaking the line-delimited wire format."""

    concurrency_safe = False

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def logprob(self, prefix: str, completion: str) -> float:
        request = json.dumps({"prefix": prefix, "completion": completion}, ensure_ascii=False)
        try:
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise ScorerError(f"scorer process {self.argv[0]}: {exc}") from exc
        if not line:
            raise ScorerError(f"scorer process {self.argv[0]} closed its output")
        try:
            return float(json.loads(line)["logprob"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScorerError(f"bad scorer response {line!r}") from exc

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "PipeScorer":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


class HttpScorer:
    """Adapter for a scorer service answering JSON POST requests."""

    concurrency_safe = True

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def logprob(self, prefix: str, completion: str) -> float:
        body = json.dumps({"prefix": prefix, "completion": completion}, ensure_ascii=False)
        request = urllib.request.Request(
            self.url,
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScorerError(f"scorer endpoint {self.url}: {exc}") from exc
        try:
            return float(payload["logprob"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScorerError(f"bad scorer response {payload!r}") from exc
