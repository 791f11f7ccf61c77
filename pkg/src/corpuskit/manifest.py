"""Run manifest: the record that, together with the inputs, pins every output byte.

The manifest carries no timestamps or host details on purpose, so rerunning
the same config over the same inputs rewrites the file with identical
content. Any drift between two runs therefore shows up as a manifest diff.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from corpuskit import __version__

TOOL_NAME = "corpuskit"


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def digest_files(files: Mapping[str, str | Path]) -> dict[str, str]:
    return {label: file_digest(path) for label, path in files.items()}


@dataclass
class RunManifest:
    """Accumulates per-stage provenance across subcommand invocations."""

    seed: int
    prng: str
    config: Mapping[str, Any]
    tool: Mapping[str, str] = field(
        default_factory=lambda: {"name": TOOL_NAME, "version": __version__}
    )
    bloom: Mapping[str, Any] | None = None
    tokenizer_fingerprint: str | None = None
    stages: dict[str, dict] = field(default_factory=dict)

    def record_stage(
        self,
        name: str,
        inputs: Mapping[str, str | Path],
        outputs: Mapping[str, str | Path],
    ) -> None:
        self.stages[name] = {
            "inputs": digest_files(inputs),
            "outputs": digest_files(outputs),
        }

    def to_json_dict(self) -> dict:
        return {
            "tool": dict(self.tool),
            "seed": self.seed,
            "prng": self.prng,
            "config": self.config,
            "bloom": dict(self.bloom) if self.bloom is not None else None,
            "tokenizer_fingerprint": self.tokenizer_fingerprint,
            "stages": self.stages,
        }

    def save(self, path: str | Path) -> None:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True, ensure_ascii=False)
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            seed=data["seed"],
            prng=data["prng"],
            config=data["config"],
            tool=data["tool"],
            bloom=data.get("bloom"),
            tokenizer_fingerprint=data.get("tokenizer_fingerprint"),
            stages=data.get("stages", {}),
        )

    @classmethod
    def open_or_create(
        cls, path: str | Path, seed: int, prng: str, config: Mapping[str, Any]
    ) -> "RunManifest":
        """Continue an existing manifest only if it matches this run's identity.

        A manifest written for a different config or seed would silently mix
        provenance, so it is replaced instead of extended.
        """
        path = Path(path)
        if path.is_file():
            manifest = cls.load(path)
            if manifest.seed == seed and manifest.config == config:
                return manifest
        return cls(seed=seed, prng=prng, config=config)
