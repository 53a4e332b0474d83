"""Classifier backend contract and the deterministic scripted implementation.

The real seam is a detector-backbone image classifier; training it is outside
this toolkit. The scripted backend replays canned per-version classifications
and accuracies from a fixture file, which is what makes the whole filtering
loop reproducible in tests.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol

CLASSES = ("unrelated", "invalid", "valid")


class ClassifierBackend(Protocol):
    def train(self, pool: dict[str, str]) -> str:
        """Train on {image_id: label}; returns the new model_version."""
        ...

    def classify(self, images: list[str]) -> list[tuple[str, float]]:
        """(class, confidence) per image, deterministic per model_version."""
        ...

    def evaluate(self, holdout: dict[str, str]) -> float:
        """Accuracy of the current model_version on the holdout set."""
        ...


class ScriptedClassifierBackend:
    """Canned classifier driven by a fixture table.

    Fixture format::

        {
          "versions": [
            {"accuracy": 0.80, "classifications": {"img-1": ["valid", 0.85], ...}},
            ...
          ]
        }

    ``train`` advances to the next version (v1, v2, ...); ``classify`` and
    ``evaluate`` read the current version's table.
    """

    def __init__(self, versions: list[dict]):
        if not versions:
            raise ValueError("scripted backend needs at least one version")
        self._versions = versions
        self._current = 0  # 0 = untrained

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClassifierBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["versions"])

    @property
    def model_version(self) -> str:
        return f"v{self._current}"

    def seek(self, train_count: int) -> None:
        """Fast-forward to the state after ``train_count`` train calls (replay)."""
        if train_count > len(self._versions):
            raise ValueError(
                f"journal records {train_count} trainings but fixture has "
                f"{len(self._versions)} versions"
            )
        self._current = train_count

    def train(self, pool: dict[str, str]) -> str:
        if self._current >= len(self._versions):
            raise RuntimeError("scripted backend exhausted its versions")
        self._current += 1
        return self.model_version

    def _table(self) -> dict:
        if self._current == 0:
            raise RuntimeError("classify/evaluate before first training")
        return self._versions[self._current - 1]

    def classify(self, images: list[str]) -> list[tuple[str, float]]:
        table = self._table()["classifications"]
        out = []
        for image_id in images:
            if image_id not in table:
                raise KeyError(
                    f"scripted backend has no entry for {image_id!r} at {self.model_version}"
                )
            cls_name, conf = table[image_id]
            if cls_name not in CLASSES:
                raise ValueError(f"unknown class {cls_name!r} for {image_id!r}")
            out.append((cls_name, float(conf)))
        return out

    def evaluate(self, holdout: dict[str, str]) -> float:
        return float(self._table()["accuracy"])
