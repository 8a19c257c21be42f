"""Python access to the ctxforge core: window planning, answer parsing,
stub embeddings, aggregation/projection and record loading."""

import json
from pathlib import Path

from ._core import (
    FEATURE_DIM,
    WORD_EMBEDDING_DIM,
    ContractError,
    ParameterError,
    ProjectionWeights,
    StoreError,
    TurnWindow,
    ValidationError,
    aggregate_slot,
    canonicalize_word,
    compose_context,
    plan_windows,
    stub_embedding,
)
from . import _core

__all__ = [
    "FEATURE_DIM",
    "WORD_EMBEDDING_DIM",
    "ContractError",
    "ParameterError",
    "ProjectionWeights",
    "StoreError",
    "TurnWindow",
    "ValidationError",
    "aggregate_slot",
    "annotate_mock",
    "canonicalize_word",
    "compose_context",
    "load_dialogues",
    "load_features",
    "load_records",
    "parse_answer",
    "plan_windows",
    "stub_embedding",
]


def load_dialogues(path):
    """Validated dialogues from an ingest JSONL file, as dicts."""
    return [json.loads(line) for line in _core._load_dialogues(str(path))]


def parse_answer(answer, window, dialogue, language="ja"):
    """Parse a model answer for `window` (a TurnWindow or (start, end)) of
    `dialogue` (a dict in the ingest format). Returns {"ok": True,
    "annotations": [...]} or {"ok": False, "failure": kind, "detail": ...}."""
    start, end = tuple(window)
    return _core._parse_answer(answer, start, end, json.dumps(dialogue, ensure_ascii=False), language)


def load_records(path):
    """Current annotation records of a record store (last line per id wins)."""
    return [json.loads(line) for line in _core._records_json(str(path))]


def load_features(path):
    """Rows of a feature export plus the metadata sidecar."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        rows = [json.loads(line) for line in f if line.strip()]
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else None
    return rows, meta


def annotate_mock(dialogues_path, script_path, records_path, workers=1):
    """Annotate a dialogue file against a scripted mock (JSONL) into a record store."""
    return _core._annotate_mock(str(dialogues_path), str(script_path), str(records_path), workers)
