"""Annotation and round record serialization."""

import json

import pytest

from tagloop import (
    AnnotationRecord,
    QueryScore,
    RoundRecord,
    annotation_from_dict,
    annotation_to_dict,
    canonical_json,
    learning_curve_rows,
    read_round_log,
    round_from_dict,
    round_to_dict,
    write_round_log,
)


def sample_round(index=0, retrain_seconds=1.25):
    annotation = AnnotationRecord(
        instance_id="pool-000003",
        annotator_id="ann-a",
        final_tags=("B-Alpha", "O"),
        rationale_spans=((0, 0),),
        suggestion_theta_version=2,
        started_at=10.0,
        submitted_at=14.5,
        comment="looked ambiguous",
    )
    score = QueryScore("pool-000003", "ltp", 0.4, {"argmin_word": 0})
    return RoundRecord(
        round_index=index,
        queried_ids=("pool-000003",),
        scores=(score,),
        annotations=(annotation,),
        exclusive={"f1": 0.5, "precision": 0.5, "recall": 0.5, "tp": 1, "fp": 1, "fn": 1},
        inclusive={"accuracy": 0.9, "estimated": False},
        workload={"round_corrections": 1, "cumulative_corrections": 1, "per_instance": {}},
        labeled_count=4,
        theta_version=3,
        retrain_seconds=retrain_seconds,
        stop_reason=None,
    )


def test_canonical_json_is_sorted_and_compact():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_annotation_round_trip():
    record = sample_round().annotations[0]
    assert annotation_from_dict(annotation_to_dict(record)) == record


def test_annotation_span_validation():
    with pytest.raises(ValueError, match="overlap"):
        AnnotationRecord("i-000000", "ann-a", ("O",), rationale_spans=((0, 2), (2, 3)))
    with pytest.raises(ValueError, match="bad rationale span"):
        AnnotationRecord("i-000000", "ann-a", ("O",), rationale_spans=((-1, 0),))
    with pytest.raises(ValueError, match="bad rationale span"):
        AnnotationRecord("i-000000", "ann-a", ("O",), rationale_spans=((3, 1),))
    # touching but disjoint inclusive spans are fine
    AnnotationRecord("i-000000", "ann-a", ("O",), rationale_spans=((0, 1), (2, 3)))


def test_round_record_round_trip():
    record = sample_round()
    assert round_from_dict(round_to_dict(record)) == record


def test_canonical_round_dict_excludes_wall_clock():
    record = sample_round()
    full = round_to_dict(record)
    canonical = round_to_dict(record, canonical=True)
    assert "retrain_seconds" in full
    assert "retrain_seconds" not in canonical
    # identical runs differing only in timing serialize identically
    slower = sample_round(retrain_seconds=99.0)
    assert canonical_json(round_to_dict(slower, canonical=True)) == canonical_json(canonical)


def test_round_log_read_write(tmp_path):
    records = [sample_round(0), sample_round(1)]
    path = tmp_path / "rounds.jsonl"
    write_round_log(records, path)
    loaded = read_round_log(path)
    assert len(loaded) == 2
    assert loaded[0].queried_ids == records[0].queried_ids
    assert loaded[0].retrain_seconds == 0.0  # canonical log drops timing
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert all(json.loads(line) for line in lines)
    assert len(lines) == 2


def test_learning_curve_rows():
    rows = learning_curve_rows([sample_round(0), sample_round(1)])
    assert rows == [(0, 4, 0.5), (1, 4, 0.5)]
