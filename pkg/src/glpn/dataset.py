"""Dataset records, JSON Lines I/O and validation.

Record order is the canonical node order: node ``i`` of every graph, label
matrix and feature matrix built downstream is ``dataset.records[i]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

SPLITS = ("train", "test")


class DatasetError(ValueError):
    """Raised when a dataset file or record set breaks the record contract."""

    def __init__(self, message: str, *, record_id: Optional[str] = None, line: Optional[int] = None):
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if record_id is not None:
            prefix.append(f"record {record_id!r}")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)
        self.record_id = record_id
        self.line = line


@dataclass(frozen=True)
class NewsRecord:
    id: str
    split: str
    label: Optional[int]
    text_embedding: np.ndarray
    image_embedding: np.ndarray
    text: Optional[str] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NewsRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.split == other.split
            and self.label == other.label
            and self.text == other.text
            and np.array_equal(self.text_embedding, other.text_embedding)
            and np.array_equal(self.image_embedding, other.image_embedding)
        )

    __hash__ = None  # type: ignore[assignment]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "split": self.split,
            "label": self.label,
            "text_embedding": [float(x) for x in self.text_embedding],
            "image_embedding": [float(x) for x in self.image_embedding],
            "text": self.text,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    records: tuple[NewsRecord, ...]
    d_t: int = field(init=False)
    d_v: int = field(init=False)

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        validate_records(records)
        object.__setattr__(self, "d_t", int(records[0].text_embedding.shape[0]))
        object.__setattr__(self, "d_v", int(records[0].image_embedding.shape[0]))

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.records == other.records

    __hash__ = None  # type: ignore[assignment]

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def n_train(self) -> int:
        return sum(r.split == "train" for r in self.records)

    @property
    def n_test(self) -> int:
        return sum(r.split == "test" for r in self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def index_of(self) -> dict[str, int]:
        return {r.id: i for i, r in enumerate(self.records)}

    def indices(self, split: str) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.records) if r.split == split], dtype=np.int64)

    @cached_property
    def _text(self) -> np.ndarray:
        return _frozen(np.vstack([r.text_embedding for r in self.records]))

    @cached_property
    def _image(self) -> np.ndarray:
        return _frozen(np.vstack([r.image_embedding for r in self.records]))

    @cached_property
    def _features(self) -> np.ndarray:
        return _frozen(np.hstack([self._text, self._image]))

    def text_matrix(self) -> np.ndarray:
        return self._text

    def image_matrix(self) -> np.ndarray:
        return self._image

    def features(self) -> np.ndarray:
        """Row ``i`` is the text embedding of node ``i`` followed by its image embedding (read-only)."""
        return self._features

    def labels(self) -> np.ndarray:
        """Ground-truth labels with ``-1`` where absent."""
        return np.array([-1 if r.label is None else r.label for r in self.records], dtype=np.int64)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_vector(vec: np.ndarray, name: str, record_id: str) -> None:
    if vec.ndim != 1 or vec.shape[0] == 0:
        raise DatasetError(f"{name} must be a non-empty vector", record_id=record_id)
    if not np.all(np.isfinite(vec)):
        raise DatasetError(f"{name} contains non-finite values", record_id=record_id)
    if not np.any(vec):
        raise DatasetError(f"{name} is the all-zero vector", record_id=record_id)


def validate_records(records: Sequence[NewsRecord]) -> None:
    if not records:
        raise DatasetError("dataset has no records")
    seen: set[str] = set()
    d_t = records[0].text_embedding.shape[0]
    d_v = records[0].image_embedding.shape[0]
    for r in records:
        if not isinstance(r.id, str) or not r.id:
            raise DatasetError("id must be a non-empty string", record_id=str(r.id))
        if r.id in seen:
            raise DatasetError("duplicate id", record_id=r.id)
        seen.add(r.id)
        if r.split not in SPLITS:
            raise DatasetError(f"split must be one of {SPLITS}, got {r.split!r}", record_id=r.id)
        if r.label is not None and r.label not in (0, 1):
            raise DatasetError(f"label must be 0, 1 or null, got {r.label!r}", record_id=r.id)
        if r.split == "train" and r.label is None:
            raise DatasetError("train record has no label", record_id=r.id)
        _check_vector(r.text_embedding, "text_embedding", r.id)
        _check_vector(r.image_embedding, "image_embedding", r.id)
        if r.text_embedding.shape[0] != d_t:
            raise DatasetError(
                f"text_embedding has dimension {r.text_embedding.shape[0]}, expected {d_t}", record_id=r.id
            )
        if r.image_embedding.shape[0] != d_v:
            raise DatasetError(
                f"image_embedding has dimension {r.image_embedding.shape[0]}, expected {d_v}", record_id=r.id
            )
        if r.text is not None and not isinstance(r.text, str):
            raise DatasetError("text must be a string or null", record_id=r.id)


def _as_vector(value: object, name: str, record_id: str, line: int) -> np.ndarray:
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise DatasetError(f"{name} must be an array of numbers", record_id=record_id, line=line)
    return np.asarray(value, dtype=np.float64)


def record_from_json(obj: object, line: int) -> NewsRecord:
    if not isinstance(obj, dict):
        raise DatasetError("expected a JSON object", line=line)
    missing = {"id", "split", "text_embedding", "image_embedding"} - obj.keys()
    if missing:
        raise DatasetError(f"missing keys {sorted(missing)}", record_id=obj.get("id"), line=line)
    rid = obj["id"]
    if not isinstance(rid, str):
        raise DatasetError("id must be a string", line=line)
    label = obj.get("label")
    if isinstance(label, bool) or (label is not None and not isinstance(label, int)):
        raise DatasetError(f"label must be 0, 1 or null, got {label!r}", record_id=rid, line=line)
    return NewsRecord(
        id=rid,
        split=obj["split"],
        label=label,
        text_embedding=_as_vector(obj["text_embedding"], "text_embedding", rid, line),
        image_embedding=_as_vector(obj["image_embedding"], "image_embedding", rid, line),
        text=obj.get("text"),
    )


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-finite number {token}")


def read_records(lines: Iterable[str]) -> list[NewsRecord]:
    records = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw, parse_constant=_reject_constant)
        except ValueError as exc:
            raise DatasetError(f"invalid JSON: {exc}", line=lineno) from None
        records.append(record_from_json(obj, lineno))
    return records


def load_dataset(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        records = read_records(fh)
    return Dataset(tuple(records))


def dumps_dataset(ds: Dataset) -> str:
    # json uses repr() for floats, which round-trips float64 exactly
    return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in ds.records)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(ds))


def l2_normalize(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / norms
