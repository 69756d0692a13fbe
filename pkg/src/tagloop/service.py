"""Annotation service: lease-based sample delivery, durable feedback
intake, background retraining, and crash-safe project persistence.

A project directory holds everything:

    project.json        immutable settings (scheme, loop config, tokens)
    corpus/*.tsv        seed / pool / validation / test splits
    state.json          current round plan + metric mode (atomic rewrite)
    annotations.jsonl   append-only feedback log, fsync'd before ack
    rounds.jsonl        append-only completed-round records
    models/theta-*.json every model snapshot by version

Leases live in memory only: a restart drops them, which is safe because
unleased instances are simply offered again. Acknowledged feedback is
replayed from the log, so a crash between acknowledgment and retraining
is detected at load time (fully annotated open round without a matching
round record) and the retrain resumes.
"""

from __future__ import annotations

import json
import os
import threading
import time

from .corpus import (
    EXCLUDED,
    CorpusSplit,
    LabelScheme,
    TokenSequence,
    read_corpus,
    write_corpus,
)
from .crf import load_model, save_model
from .explain import explain_occlusion
from .loop import ActiveLoop, LoopConfig
from .metrics import compute_consistency
from .records import (
    AnnotationRecord,
    annotation_from_dict,
    annotation_to_dict,
    canonical_json,
    round_from_dict,
    round_to_dict,
)
from .strategies import QueryScore

__all__ = [
    "ServiceError",
    "AuthError",
    "RejectError",
    "ConflictError",
    "IntegrityError",
    "AnnotationService",
    "create_project",
]

METRIC_MODES = ("exclusive", "inclusive")
DEFAULT_LEASE_SECONDS = 600.0


class ServiceError(Exception):
    status = 500

    def __init__(self, message: str, code: str = "error"):
        super().__init__(message)
        self.code = code


class AuthError(ServiceError):
    status = 401


class RejectError(ServiceError):
    status = 422


class ConflictError(ServiceError):
    status = 409


class IntegrityError(ServiceError):
    status = 500


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(text)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


def _plan_to_dict(plan) -> dict:
    return {
        "round_index": plan.round_index,
        "queried_ids": list(plan.queried_ids),
        "scores": {
            i: {
                "instance_id": s.instance_id,
                "strategy": s.strategy,
                "score": s.score,
                "evidence": s.evidence,
            }
            for i, s in plan.scores.items()
        },
        "suggestions": {i: list(tags) for i, tags in plan.suggestions.items()},
        "theta_version": plan.theta_version,
    }


def _plan_from_dict(payload: dict):
    from .loop import RoundPlan

    return RoundPlan(
        round_index=payload["round_index"],
        queried_ids=tuple(payload["queried_ids"]),
        scores={
            i: QueryScore(s["instance_id"], s["strategy"], s["score"], s["evidence"])
            for i, s in payload["scores"].items()
        },
        suggestions={i: tuple(tags) for i, tags in payload["suggestions"].items()},
        theta_version=payload["theta_version"],
    )


def create_project(
    project_dir,
    split: CorpusSplit,
    scheme: LabelScheme,
    config: LoopConfig,
    annotator_tokens: dict[str, str],
    project_id: str = "project",
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
    metric_mode: str = "exclusive",
) -> str:
    """Lay down a fresh project directory; the service trains on load."""
    if metric_mode not in METRIC_MODES:
        raise ValueError(f"metric_mode must be one of {METRIC_MODES}")
    if not annotator_tokens:
        raise ValueError("at least one annotator token is required")
    project_dir = str(project_dir)
    corpus_dir = os.path.join(project_dir, "corpus")
    os.makedirs(corpus_dir, exist_ok=True)
    os.makedirs(os.path.join(project_dir, "models"), exist_ok=True)
    for name, data in (
        ("seed", split.seed),
        ("pool", split.pool),
        ("validation", split.validation),
        ("test", split.test),
    ):
        write_corpus(list(data), os.path.join(corpus_dir, f"{name}.tsv"))
    settings = {
        "project_id": project_id,
        "scheme": {
            "entity_types": list(scheme.entity_types),
            "mapping": [list(rule) for rule in scheme.mapping],
        },
        "loop_config": config.to_dict(),
        "annotator_tokens": annotator_tokens,
        "lease_seconds": lease_seconds,
    }
    _atomic_write(os.path.join(project_dir, "project.json"), canonical_json(settings) + "\n")
    _atomic_write(
        os.path.join(project_dir, "state.json"),
        canonical_json({"metric_mode": metric_mode, "open_plan": None}) + "\n",
    )
    return project_dir


class AnnotationService:
    """Single project, many annotators; mutations serialized by a lock.

    Retraining runs outside the lock against the loop's snapshot; reads
    keep hitting the previous model reference until the new one is
    committed, so no reader ever blocks on training.
    """

    def __init__(self, project_dir, clock=time.time, lease_seconds: float | None = None):
        self.project_dir = str(project_dir)
        self.clock = clock
        self._lock = threading.RLock()
        self._retraining = threading.Event()
        self._retrain_thread: threading.Thread | None = None
        try:
            self._load(lease_seconds)
        except ServiceError:
            raise
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
            raise IntegrityError(f"project load failed: {err}", "corrupt_project") from err

    # -- loading -----------------------------------------------------------

    def _path(self, *parts) -> str:
        return os.path.join(self.project_dir, *parts)

    def _load(self, lease_override: float | None) -> None:
        with open(self._path("project.json"), encoding="utf-8") as handle:
            settings = json.load(handle)
        self.project_id = settings["project_id"]
        self.scheme = LabelScheme(
            entity_types=tuple(settings["scheme"]["entity_types"]),
            mapping=tuple(tuple(rule) for rule in settings["scheme"]["mapping"]),
        )
        self.config = LoopConfig.from_dict(settings["loop_config"])
        self.tokens = dict(settings["annotator_tokens"])
        self.lease_seconds = float(
            lease_override if lease_override is not None else settings["lease_seconds"]
        )

        with open(self._path("state.json"), encoding="utf-8") as handle:
            state = json.load(handle)
        self.metric_mode = state["metric_mode"]
        if self.metric_mode not in METRIC_MODES:
            raise ValueError(f"bad metric mode {self.metric_mode!r}")

        split = CorpusSplit(
            seed=tuple(self._read_split("seed")),
            pool=tuple(self._read_split("pool")),
            validation=tuple(self._read_split("validation")),
            test=tuple(self._read_split("test")),
        )

        rounds = []
        if os.path.exists(self._path("rounds.jsonl")):
            with open(self._path("rounds.jsonl"), encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        rounds.append(round_from_dict(json.loads(line)))

        self._annotation_log: list[dict] = []
        if os.path.exists(self._path("annotations.jsonl")):
            with open(self._path("annotations.jsonl"), encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        self._annotation_log.append(json.loads(line))

        snapshots = sorted(
            name for name in os.listdir(self._path("models")) if name.endswith(".json")
        ) if os.path.isdir(self._path("models")) else []

        if snapshots:
            model = load_model(self._path("models", snapshots[-1]))
            self.loop = ActiveLoop(split, self.config, self.scheme, model.encoder, model)
        else:
            os.makedirs(self._path("models"), exist_ok=True)
            self.loop = ActiveLoop(split, self.config, self.scheme)
            self._save_snapshot()

        # Replay completed rounds: move annotated instances out of the
        # pool without retraining (the latest snapshot already reflects
        # them), then restore the open plan.
        pool_ids = set(self.loop.pool)
        for record in rounds:
            for annotation in record.annotations:
                if annotation.instance_id not in pool_ids:
                    raise ValueError(
                        f"round log references unknown instance {annotation.instance_id}"
                    )
                seq = self.loop.pool.pop(annotation.instance_id)
                self.loop.labeled.append(seq.with_word_tags(annotation.final_tags))
                pool_ids.discard(annotation.instance_id)
        self.loop.records = rounds
        if rounds:
            self.loop._cumulative_corrections = rounds[-1].workload["cumulative_corrections"]
            self.loop.stop_reason = rounds[-1].stop_reason

        self.leases: dict[str, tuple[str, float]] = {}
        self._acks: dict[tuple[str, str], dict] = {}
        self._submitted: dict[str, AnnotationRecord] = {}
        for entry in self._annotation_log:
            annotation = entry["annotation"]
            self._acks[(annotation["instance_id"], annotation["annotator_id"])] = entry["ack"]

        plan_payload = state.get("open_plan")
        if plan_payload is not None:
            if plan_payload["round_index"] != len(rounds):
                raise ValueError("open plan does not follow the completed rounds")
            self.loop._open = _plan_from_dict(plan_payload)
            for entry in self._annotation_log:
                if entry["round_index"] == plan_payload["round_index"] and not entry["secondary"]:
                    record = annotation_from_dict(entry["annotation"])
                    self._submitted[record.instance_id] = record
            if set(self._submitted) >= set(plan_payload["queried_ids"]):
                # crashed after the last ack but before retraining
                self._finish_round()

        self._ensure_round_open()

    def _read_split(self, name: str) -> list[TokenSequence]:
        path = self._path("corpus", f"{name}.tsv")
        if not os.path.exists(path):
            return []
        return read_corpus(path, scheme=self.scheme, id_prefix=name)

    # -- persistence -------------------------------------------------------

    def _save_snapshot(self) -> None:
        save_model(
            self.loop.model,
            self._path("models", f"theta-{self.loop.model.theta_version:06d}.json"),
        )

    def save(self) -> None:
        with self._lock:
            plan = self.loop._open
            state = {
                "metric_mode": self.metric_mode,
                "open_plan": _plan_to_dict(plan) if plan is not None else None,
            }
            _atomic_write(self._path("state.json"), canonical_json(state) + "\n")

    def _append_round(self, record) -> None:
        with open(self._path("rounds.jsonl"), "a", encoding="utf-8") as handle:
            handle.write(canonical_json(round_to_dict(record)) + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def _append_annotation(self, entry: dict) -> None:
        line = canonical_json(entry)
        with open(self._path("annotations.jsonl"), "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        # mirror the on-disk representation so a reload changes nothing
        self._annotation_log.append(json.loads(line))

    # -- round lifecycle ---------------------------------------------------

    def _ensure_round_open(self) -> None:
        if self.loop.stop_reason is None and self.loop._open is None and self.loop.pool:
            self.loop.open_round()
            self.save()

    def _finish_round(self) -> None:
        """Retrain on the completed batch and open the next round."""
        plan = self.loop._open
        annotations = [self._submitted[i] for i in plan.queried_ids]
        record = self.loop.complete_round(annotations)
        with self._lock:
            self._append_round(record)
            self._save_snapshot()
            self._submitted = {}
            self._ensure_round_open()
            self.save()

    def _start_retrain(self) -> None:
        self._retraining.set()

        def worker():
            try:
                self._finish_round()
            finally:
                self._retraining.clear()

        self._retrain_thread = threading.Thread(target=worker, daemon=True)
        self._retrain_thread.start()

    def wait_for_retrain(self, timeout: float = 60.0) -> None:
        thread = self._retrain_thread
        if thread is not None:
            thread.join(timeout)
            if thread.is_alive():
                raise TimeoutError("retraining did not finish in time")

    # -- auth --------------------------------------------------------------

    def authenticate(self, token: str) -> str:
        for annotator, expected in self.tokens.items():
            if token == expected:
                return annotator
        raise AuthError("unknown annotator token", "unknown_annotator")

    def _check_annotator(self, annotator_id: str) -> None:
        if annotator_id not in self.tokens:
            raise AuthError(f"unknown annotator {annotator_id!r}", "unknown_annotator")

    # -- API operations ----------------------------------------------------

    def next_sample(self, annotator_id: str) -> dict:
        self._check_annotator(annotator_id)
        with self._lock:
            if self._retraining.is_set():
                return {"status": "retraining"}
            if self.loop.stop_reason is not None:
                return {"status": "stopped", "reason": self.loop.stop_reason}
            plan = self.loop._open
            if plan is None:
                return {"status": "round_drained"}
            now = self.clock()
            self.leases = {
                i: lease for i, lease in self.leases.items() if lease[1] > now
            }
            for instance_id, (holder, _) in self.leases.items():
                if holder == annotator_id and instance_id not in self._submitted:
                    return self._sample_payload(instance_id, plan, now)
            assignable = [
                i
                for i in plan.queried_ids
                if i not in self._submitted and i not in self.leases
            ]
            if not assignable:
                return {"status": "round_drained"}
            instance_id = min(assignable)
            self.leases[instance_id] = (annotator_id, now + self.lease_seconds)
            return self._sample_payload(instance_id, plan, now)

    def _sample_payload(self, instance_id: str, plan, now: float) -> dict:
        from .crf import token_marginals

        seq = self.loop.pool[instance_id]
        suggestion = plan.suggestions[instance_id]
        marginals = token_marginals(self.loop.model, seq)
        score = plan.scores[instance_id]
        target = score.evidence.get("argmin_position")
        if target is None:
            target = seq.word_initial_positions[0]
        saliency = explain_occlusion(self.loop.model, seq, target)
        subtoken_tags = []
        word = -1
        for initial in seq.is_word_initial:
            if initial:
                word += 1
                subtoken_tags.append(suggestion[word])
            else:
                subtoken_tags.append(EXCLUDED)
        return {
            "status": "ok",
            "round_index": plan.round_index,
            "theta_version": plan.theta_version,
            "lease_expires_at": self.leases[instance_id][1],
            "instance": {
                "id": seq.id,
                "subtokens": list(seq.subtokens),
                "word_index": list(seq.word_index),
                "is_word_initial": list(seq.is_word_initial),
                "words": list(seq.words),
            },
            "suggested_word_tags": list(suggestion),
            "suggested_tags": subtoken_tags,
            "tag_set": list(self.scheme.bio_tags),
            "decode_tags": list(self.scheme.decode_tags),
            "token_marginals": marginals.tolist(),
            "saliency": saliency.tolist(),
            "saliency_target": int(target),
            "query_score": {
                "strategy": score.strategy,
                "score": score.score,
                "evidence": score.evidence,
            },
        }

    def submit_feedback(self, record: AnnotationRecord) -> dict:
        self._check_annotator(record.annotator_id)
        with self._lock:
            if self._retraining.is_set():
                raise ConflictError("retraining in progress", "retraining")
            key = (record.instance_id, record.annotator_id)
            if key in self._acks:
                return self._acks[key]
            plan = self.loop._open
            if plan is None:
                raise RejectError("no open round", "no_open_round")
            if record.instance_id not in plan.queried_ids:
                raise RejectError(
                    f"instance {record.instance_id} was not queried this round",
                    "not_queried",
                )

            seq = self.loop.pool[record.instance_id]
            self._validate_annotation(record, seq)

            now = self.clock()
            lease = self.leases.get(record.instance_id)
            if lease is not None and lease[1] > now and lease[0] != record.annotator_id:
                raise ConflictError(
                    f"instance {record.instance_id} is leased to another annotator",
                    "lease_held",
                )
            started = record.started_at
            if started is None and lease is not None:
                started = lease[1] - self.lease_seconds
            record = AnnotationRecord(
                instance_id=record.instance_id,
                annotator_id=record.annotator_id,
                final_tags=record.final_tags,
                rationale_spans=record.rationale_spans,
                suggestion_theta_version=record.suggestion_theta_version,
                started_at=started,
                submitted_at=record.submitted_at if record.submitted_at is not None else now,
                comment=record.comment,
            )

            secondary = record.instance_id in self._submitted
            stale = record.suggestion_theta_version != plan.theta_version
            workload = sum(
                s != f
                for s, f in zip(plan.suggestions[record.instance_id], record.final_tags)
            )
            completes = (
                not secondary
                and len(self._submitted) + 1 == len(plan.queried_ids)
            )
            ack = {
                "status": "accepted",
                "instance_id": record.instance_id,
                "workload": workload,
                "stale": stale,
                "secondary": secondary,
                "retraining_started": completes,
            }
            self._append_annotation(
                {
                    "round_index": plan.round_index,
                    "annotation": annotation_to_dict(record),
                    "ack": ack,
                    "secondary": secondary,
                }
            )
            self._acks[key] = ack
            if not secondary:
                self._submitted[record.instance_id] = record
            self.leases.pop(record.instance_id, None)
            if completes:
                self._start_retrain()
            return ack

    def _validate_annotation(self, record: AnnotationRecord, seq: TokenSequence) -> None:
        if len(record.final_tags) != seq.n_words:
            raise RejectError(
                f"expected {seq.n_words} word tags, got {len(record.final_tags)}",
                "bad_length",
            )
        valid = set(self.scheme.decode_tags)
        for tag in record.final_tags:
            if tag not in valid:
                raise RejectError(f"tag {tag!r} outside the scheme", "invalid_tag")
        for start, end in record.rationale_spans:
            if end >= seq.n_words:
                raise RejectError(
                    f"rationale span ({start}, {end}) out of bounds", "bad_span"
                )

    def model_inspection(self) -> dict:
        with self._lock:
            rounds = [
                {
                    "round_index": r.round_index,
                    "labeled_count": r.labeled_count,
                    "theta_version": r.theta_version,
                    "queried_ids": list(r.queried_ids),
                    "exclusive": r.exclusive,
                    "inclusive": r.inclusive,
                    "workload": r.workload,
                    "stop_reason": r.stop_reason,
                }
                for r in self.loop.records
            ]
            return {"metric_mode": self.metric_mode, "rounds": rounds}

    def set_metric_mode(self, mode: str) -> dict:
        if mode not in METRIC_MODES:
            raise RejectError(f"metric mode must be one of {METRIC_MODES}", "bad_mode")
        with self._lock:
            self.metric_mode = mode
            self.save()
            return {"metric_mode": mode}

    def task_overview(self) -> dict:
        with self._lock:
            completed = len(self.loop.records)
            pool_size = len(self.loop.pool)
            plan = self.loop._open
            remaining_rounds = max(self.config.rounds_budget - completed, 0)
            per_annotator: dict[str, dict] = {}
            for entry in self._annotation_log:
                annotation = entry["annotation"]
                stats = per_annotator.setdefault(
                    annotation["annotator_id"],
                    {"instances": 0, "corrections": 0, "seconds": 0.0},
                )
                stats["instances"] += 1
                stats["corrections"] += entry["ack"]["workload"]
                if annotation["started_at"] is not None and annotation["submitted_at"] is not None:
                    stats["seconds"] += annotation["submitted_at"] - annotation["started_at"]
            overview = {
                "project_id": self.project_id,
                "rounds_completed": completed,
                "rounds_budget": self.config.rounds_budget,
                "batch_size": self.config.batch_size,
                "instances_annotated": sum(
                    len(r.queried_ids) for r in self.loop.records
                ),
                "pool_remaining": pool_size,
                "estimated_remaining_instances": min(
                    pool_size, remaining_rounds * self.config.batch_size
                ),
                "stopping": {
                    "rule": self.config.stop_rule,
                    "status": "stop_recommended"
                    if self.loop.stop_reason is not None
                    else "continue",
                    "reason": self.loop.stop_reason,
                },
                "current_round": {
                    "open": plan is not None,
                    "round_index": plan.round_index if plan is not None else completed,
                    "submitted": len(self._submitted),
                    "batch": len(plan.queried_ids) if plan is not None else 0,
                    "retraining": self._retraining.is_set(),
                },
                "per_annotator_workload": per_annotator,
            }
            consistency = self._consistency_reports()
            if consistency is not None:
                overview["consistency"] = consistency
            return overview

    def _consistency_reports(self) -> list[dict] | None:
        records = [annotation_from_dict(e["annotation"]) for e in self._annotation_log]
        if len({r.annotator_id for r in records}) < 2:
            return None
        try:
            reports = compute_consistency(records)
        except ValueError:
            return None
        return [
            {
                "annotator_a": r.annotator_a,
                "annotator_b": r.annotator_b,
                "overlap_instances": r.overlap_instances,
                "raw_agreement": r.raw_agreement,
                "kappa": r.kappa,
            }
            for r in reports
        ]

    def export_annotations(self) -> list[dict]:
        with self._lock:
            return [dict(entry) for entry in self._annotation_log]
