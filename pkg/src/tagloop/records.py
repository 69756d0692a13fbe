"""Annotation and round records plus their canonical serialization.

Canonical JSON (sorted keys, no whitespace, no NaN) makes determinism
testable byte-for-byte: two runs with the same config and seed must
produce identical canonical round logs. Wall-clock fields are excluded
from the canonical form for that reason and only appear in full dumps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .strategies import QueryScore

__all__ = [
    "AnnotationRecord",
    "RoundRecord",
    "canonical_json",
    "annotation_to_dict",
    "annotation_from_dict",
    "round_to_dict",
    "round_from_dict",
    "write_round_log",
    "read_round_log",
    "learning_curve_rows",
]


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's final word-level tags for one instance."""

    instance_id: str
    annotator_id: str
    final_tags: tuple[str, ...]
    rationale_spans: tuple[tuple[int, int], ...] = ()
    suggestion_theta_version: int = 0
    started_at: float | None = None
    submitted_at: float | None = None
    comment: str | None = None

    def __post_init__(self):
        spans = sorted(self.rationale_spans)
        for start, end in spans:
            if start < 0 or end < start:
                raise ValueError(f"bad rationale span ({start}, {end})")
        for (_, prev_end), (nxt_start, _) in zip(spans, spans[1:]):
            if nxt_start <= prev_end:
                raise ValueError("rationale spans overlap")


def annotation_to_dict(record: AnnotationRecord) -> dict:
    return {
        "instance_id": record.instance_id,
        "annotator_id": record.annotator_id,
        "final_tags": list(record.final_tags),
        "rationale_spans": [list(span) for span in record.rationale_spans],
        "suggestion_theta_version": record.suggestion_theta_version,
        "started_at": record.started_at,
        "submitted_at": record.submitted_at,
        "comment": record.comment,
    }


def annotation_from_dict(payload: dict) -> AnnotationRecord:
    return AnnotationRecord(
        instance_id=payload["instance_id"],
        annotator_id=payload["annotator_id"],
        final_tags=tuple(payload["final_tags"]),
        rationale_spans=tuple(tuple(span) for span in payload["rationale_spans"]),
        suggestion_theta_version=payload["suggestion_theta_version"],
        started_at=payload.get("started_at"),
        submitted_at=payload.get("submitted_at"),
        comment=payload.get("comment"),
    )


@dataclass(frozen=True)
class RoundRecord:
    """Everything one query-annotate-retrain round produced."""

    round_index: int
    queried_ids: tuple[str, ...]
    scores: tuple[QueryScore, ...]
    annotations: tuple[AnnotationRecord, ...]
    exclusive: dict
    inclusive: dict
    workload: dict
    labeled_count: int
    theta_version: int
    retrain_seconds: float = 0.0
    stop_reason: str | None = None


def _score_to_dict(score: QueryScore) -> dict:
    return {
        "instance_id": score.instance_id,
        "strategy": score.strategy,
        "score": score.score,
        "evidence": score.evidence,
    }


def round_to_dict(record: RoundRecord, canonical: bool = False) -> dict:
    payload = {
        "round_index": record.round_index,
        "queried_ids": list(record.queried_ids),
        "scores": [_score_to_dict(s) for s in record.scores],
        "annotations": [annotation_to_dict(a) for a in record.annotations],
        "exclusive": record.exclusive,
        "inclusive": record.inclusive,
        "workload": record.workload,
        "labeled_count": record.labeled_count,
        "theta_version": record.theta_version,
        "stop_reason": record.stop_reason,
    }
    if not canonical:
        payload["retrain_seconds"] = record.retrain_seconds
    return payload


def round_from_dict(payload: dict) -> RoundRecord:
    return RoundRecord(
        round_index=payload["round_index"],
        queried_ids=tuple(payload["queried_ids"]),
        scores=tuple(
            QueryScore(s["instance_id"], s["strategy"], s["score"], s["evidence"])
            for s in payload["scores"]
        ),
        annotations=tuple(annotation_from_dict(a) for a in payload["annotations"]),
        exclusive=payload["exclusive"],
        inclusive=payload["inclusive"],
        workload=payload["workload"],
        labeled_count=payload["labeled_count"],
        theta_version=payload["theta_version"],
        retrain_seconds=payload.get("retrain_seconds", 0.0),
        stop_reason=payload.get("stop_reason"),
    )


def write_round_log(records, path, canonical: bool = True) -> None:
    """Append-only newline-delimited records, one object per round."""
    with open(str(path), "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(canonical_json(round_to_dict(record, canonical=canonical)))
            handle.write("\n")


def read_round_log(path) -> list[RoundRecord]:
    records = []
    with open(str(path), encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(round_from_dict(json.loads(line)))
    return records


def learning_curve_rows(records) -> list[tuple[int, int, float]]:
    """(round, labeled count, exclusive F1) triples for TSV export."""
    return [(r.round_index, r.labeled_count, r.exclusive["f1"]) for r in records]
