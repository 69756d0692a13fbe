"""Annotation service: leases, durability, recovery, HTTP surface."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tagloop import (
    ActiveLoop,
    AnnotationRecord,
    AnnotationService,
    AuthError,
    ConflictError,
    CorpusSplit,
    GeneratorConfig,
    IntegrityError,
    LoopConfig,
    RejectError,
    canonical_json,
    create_app,
    create_project,
    explain_occlusion,
    generate_synthetic_corpus,
    read_corpus,
    round_to_dict,
    token_marginals,
)

TOKENS = {"ann-a": "token-a", "ann-b": "token-b"}


class FakeClock:
    def __init__(self, start=1000.0):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


def default_config(**overrides):
    base = dict(
        strategy="ltp",
        batch_size=2,
        rounds_budget=5,
        passes=1,
        retrain_epochs=2,
        rng_seed=0,
    )
    base.update(overrides)
    return LoopConfig(**base)


def make_project(tmp_path, name="proj", config=None, n_pool=10, tokens=TOKENS):
    generator = GeneratorConfig(n_seed=4, n_pool=n_pool, n_validation=6, n_test=10)
    split = generate_synthetic_corpus(generator, rng_seed=1)
    project_dir = tmp_path / name
    create_project(
        project_dir,
        split,
        generator.scheme(),
        config or default_config(),
        tokens,
        project_id=name,
    )
    return str(project_dir)


def service_for(project_dir, clock=None):
    return AnnotationService(project_dir, clock=clock or FakeClock())


def accept_all(svc, annotator_id):
    """Take the next sample and submit its suggestion unchanged."""
    payload = svc.next_sample(annotator_id)
    assert payload["status"] == "ok", payload
    record = AnnotationRecord(
        instance_id=payload["instance"]["id"],
        annotator_id=annotator_id,
        final_tags=tuple(payload["suggested_word_tags"]),
        suggestion_theta_version=payload["theta_version"],
    )
    return svc.submit_feedback(record)


def complete_round(svc):
    first = accept_all(svc, "ann-a")
    second = accept_all(svc, "ann-b")
    assert second["retraining_started"]
    svc.wait_for_retrain()
    return first, second


# ---------------------------------------------------------------------------
# Project directory


def test_create_project_layout(tmp_path):
    project_dir = make_project(tmp_path)
    for name in ("project.json", "state.json"):
        assert (tmp_path / "proj" / name).exists()
    for part in ("seed", "pool", "validation", "test"):
        assert (tmp_path / "proj" / "corpus" / f"{part}.tsv").exists()
    svc = service_for(project_dir)
    assert svc.project_id == "proj"
    assert len(svc.loop.pool) == 10
    # one model snapshot written at first load
    assert any(f.name.startswith("theta-") for f in (tmp_path / "proj" / "models").iterdir())


def test_create_project_validation(tmp_path):
    generator = GeneratorConfig(n_seed=1, n_pool=2, n_validation=1, n_test=1)
    split = generate_synthetic_corpus(generator, rng_seed=0)
    with pytest.raises(ValueError, match="metric_mode"):
        create_project(tmp_path / "x", split, generator.scheme(), default_config(), TOKENS,
                       metric_mode="both")
    with pytest.raises(ValueError, match="annotator token"):
        create_project(tmp_path / "y", split, generator.scheme(), default_config(), {})


def test_authentication(tmp_path):
    svc = service_for(make_project(tmp_path))
    assert svc.authenticate("token-a") == "ann-a"
    with pytest.raises(AuthError):
        svc.authenticate("nope")
    with pytest.raises(AuthError):
        svc.next_sample("stranger")


# ---------------------------------------------------------------------------
# Leases


def test_leases_are_exclusive_and_sticky(tmp_path):
    svc = service_for(make_project(tmp_path))
    a = svc.next_sample("ann-a")
    b = svc.next_sample("ann-b")
    assert a["instance"]["id"] != b["instance"]["id"]
    again = svc.next_sample("ann-a")
    assert again["instance"]["id"] == a["instance"]["id"]


def test_expired_lease_is_reassigned(tmp_path):
    clock = FakeClock()
    svc = service_for(make_project(tmp_path), clock=clock)
    a = svc.next_sample("ann-a")
    assert a["lease_expires_at"] == clock.now + svc.lease_seconds
    clock.advance(svc.lease_seconds + 1)
    b = svc.next_sample("ann-b")
    assert b["instance"]["id"] == a["instance"]["id"]


def test_round_drained_when_all_instances_held(tmp_path):
    svc = service_for(make_project(tmp_path))
    accept_all(svc, "ann-a")
    svc.next_sample("ann-b")
    assert svc.next_sample("ann-a") == {"status": "round_drained"}


def test_submit_blocked_by_live_foreign_lease(tmp_path):
    svc = service_for(make_project(tmp_path))
    b_payload = svc.next_sample("ann-b")
    record = AnnotationRecord(
        instance_id=b_payload["instance"]["id"],
        annotator_id="ann-a",
        final_tags=tuple(b_payload["suggested_word_tags"]),
        suggestion_theta_version=b_payload["theta_version"],
    )
    with pytest.raises(ConflictError, match="leased"):
        svc.submit_feedback(record)


# ---------------------------------------------------------------------------
# Submission validation and idempotency


def test_submit_rejections(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    instance_id = payload["instance"]["id"]
    n_words = len(payload["suggested_word_tags"])

    def submit(**kwargs):
        record = AnnotationRecord(
            instance_id=kwargs.pop("instance_id", instance_id),
            annotator_id="ann-a",
            final_tags=kwargs.pop("final_tags", tuple(payload["suggested_word_tags"])),
            suggestion_theta_version=payload["theta_version"],
            **kwargs,
        )
        return svc.submit_feedback(record)

    with pytest.raises(RejectError, match="not queried"):
        submit(instance_id="pool-000099")
    with pytest.raises(RejectError, match="word tags"):
        submit(final_tags=("O",) * (n_words + 1))
    with pytest.raises(RejectError, match="outside the scheme"):
        submit(final_tags=("B-Nonsense",) * n_words)
    with pytest.raises(RejectError, match="out of bounds"):
        submit(rationale_spans=((0, n_words),))


def test_duplicate_submission_returns_first_ack(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    record = AnnotationRecord(
        instance_id=payload["instance"]["id"],
        annotator_id="ann-a",
        final_tags=tuple(payload["suggested_word_tags"]),
        suggestion_theta_version=payload["theta_version"],
    )
    first = svc.submit_feedback(record)
    log_len = len(svc.export_annotations())
    assert svc.submit_feedback(record) == first
    assert len(svc.export_annotations()) == log_len


def test_duplicate_after_retrain_still_acknowledged(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    record = AnnotationRecord(
        instance_id=payload["instance"]["id"],
        annotator_id="ann-a",
        final_tags=tuple(payload["suggested_word_tags"]),
        suggestion_theta_version=payload["theta_version"],
    )
    first = svc.submit_feedback(record)
    accept_all(svc, "ann-b")
    svc.wait_for_retrain()
    # the round is gone, yet the duplicate resolves to the original ack
    assert svc.submit_feedback(record) == first


def test_stale_suggestion_accepted_but_flagged(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    record = AnnotationRecord(
        instance_id=payload["instance"]["id"],
        annotator_id="ann-a",
        final_tags=tuple(payload["suggested_word_tags"]),
        suggestion_theta_version=payload["theta_version"] - 1,
    )
    ack = svc.submit_feedback(record)
    assert ack["status"] == "accepted"
    assert ack["stale"] is True


def test_workload_counts_edits(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    suggestion = list(payload["suggested_word_tags"])
    edited = list(suggestion)
    edited[0] = "B-Drug" if suggestion[0] != "B-Drug" else "O"
    ack = svc.submit_feedback(
        AnnotationRecord(
            instance_id=payload["instance"]["id"],
            annotator_id="ann-a",
            final_tags=tuple(edited),
            suggestion_theta_version=payload["theta_version"],
        )
    )
    assert ack["workload"] == 1


def test_submissions_blocked_during_retraining(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    svc._retraining.set()
    try:
        assert svc.next_sample("ann-b") == {"status": "retraining"}
        with pytest.raises(ConflictError, match="retraining"):
            svc.submit_feedback(
                AnnotationRecord(
                    instance_id=payload["instance"]["id"],
                    annotator_id="ann-a",
                    final_tags=tuple(payload["suggested_word_tags"]),
                    suggestion_theta_version=payload["theta_version"],
                )
            )
    finally:
        svc._retraining.clear()


# ---------------------------------------------------------------------------
# Sample payload content


def test_sample_payload_mirrors_model_state(tmp_path):
    svc = service_for(make_project(tmp_path))
    payload = svc.next_sample("ann-a")
    seq = svc.loop.pool[payload["instance"]["id"]]
    assert payload["instance"]["subtokens"] == list(seq.subtokens)
    assert payload["instance"]["words"] == list(seq.words)
    assert payload["tag_set"] == list(svc.scheme.bio_tags)
    assert payload["decode_tags"] == list(svc.scheme.decode_tags)
    # non-initial pieces render as EXCLUDED in the subtoken projection
    for tag, initial in zip(payload["suggested_tags"], seq.is_word_initial):
        assert (tag == "X") == (not initial)
    marginals = token_marginals(svc.loop.model, seq)
    assert np.allclose(np.array(payload["token_marginals"]), marginals)
    saliency = explain_occlusion(svc.loop.model, seq, payload["saliency_target"])
    assert np.allclose(np.array(payload["saliency"]), saliency)
    assert payload["saliency_target"] == payload["query_score"]["evidence"]["argmin_position"]
    assert payload["query_score"]["strategy"] == "ltp"


# ---------------------------------------------------------------------------
# Round lifecycle and metrics


def test_round_completion_retrains_and_advances(tmp_path):
    svc = service_for(make_project(tmp_path))
    version_before = svc.loop.model.theta_version
    first, second = complete_round(svc)
    assert first["retraining_started"] is False
    assert svc.loop.model.theta_version == version_before + 1
    inspection = svc.model_inspection()
    assert len(inspection["rounds"]) == 1
    assert inspection["rounds"][0]["labeled_count"] == 6
    overview = svc.task_overview()
    assert overview["rounds_completed"] == 1
    assert overview["current_round"]["open"] is True
    assert overview["current_round"]["round_index"] == 1


def test_overview_remaining_budget_arithmetic(tmp_path):
    svc = service_for(make_project(tmp_path))
    for _ in range(3):
        complete_round(svc)
    overview = svc.task_overview()
    assert overview["rounds_completed"] == 3
    assert overview["instances_annotated"] == 6
    assert overview["pool_remaining"] == 4
    # two rounds of two instances remain within budget
    assert overview["estimated_remaining_instances"] == 4
    assert overview["stopping"]["status"] == "continue"


def test_empty_history_inspection(tmp_path):
    svc = service_for(make_project(tmp_path))
    inspection = svc.model_inspection()
    assert inspection == {"metric_mode": "exclusive", "rounds": []}
    overview = svc.task_overview()
    assert overview["rounds_completed"] == 0
    assert "consistency" not in overview


def test_metric_mode_switch_is_non_destructive(tmp_path):
    project_dir = make_project(tmp_path)
    svc = service_for(project_dir)
    complete_round(svc)
    before = svc.model_inspection()["rounds"]
    assert svc.set_metric_mode("inclusive") == {"metric_mode": "inclusive"}
    state = json.loads((tmp_path / "proj" / "state.json").read_text())
    assert state["metric_mode"] == "inclusive"
    after = svc.model_inspection()
    assert after["metric_mode"] == "inclusive"
    assert after["rounds"] == before
    with pytest.raises(RejectError, match="metric mode"):
        svc.set_metric_mode("both")


def test_secondary_annotation_enables_consistency(tmp_path):
    svc = service_for(make_project(tmp_path))
    a_payload = svc.next_sample("ann-a")
    record_a = AnnotationRecord(
        instance_id=a_payload["instance"]["id"],
        annotator_id="ann-a",
        final_tags=tuple(a_payload["suggested_word_tags"]),
        suggestion_theta_version=a_payload["theta_version"],
    )
    svc.submit_feedback(record_a)
    ack_b = svc.submit_feedback(
        AnnotationRecord(
            instance_id=a_payload["instance"]["id"],
            annotator_id="ann-b",
            final_tags=tuple(a_payload["suggested_word_tags"]),
            suggestion_theta_version=a_payload["theta_version"],
        )
    )
    assert ack_b["secondary"] is True
    assert ack_b["retraining_started"] is False
    overview = svc.task_overview()
    reports = overview["consistency"]
    assert reports == [
        {
            "annotator_a": "ann-a",
            "annotator_b": "ann-b",
            "overlap_instances": 1,
            "raw_agreement": 1.0,
            "kappa": 1.0,
        }
    ]
    assert set(overview["per_annotator_workload"]) == {"ann-a", "ann-b"}


# ---------------------------------------------------------------------------
# Durability


def canonical_rounds(svc):
    return [canonical_json(round_to_dict(r, canonical=True)) for r in svc.loop.records]


def test_save_load_round_trips_byte_identical(tmp_path):
    project_dir = make_project(tmp_path)
    clock = FakeClock()
    svc = service_for(project_dir, clock=clock)
    complete_round(svc)
    accept_all(svc, "ann-a")  # half-finished second round
    svc.save()

    def disk_state():
        return {
            name: (tmp_path / "proj" / name).read_bytes()
            for name in ("state.json", "rounds.jsonl", "annotations.jsonl")
        }

    before_files = disk_state()
    before_inspection = svc.model_inspection()
    before_overview = svc.task_overview()

    reloaded = AnnotationService(project_dir, clock=clock)
    reloaded.save()
    assert disk_state() == before_files
    assert reloaded.model_inspection() == before_inspection
    assert reloaded.task_overview() == before_overview
    assert canonical_rounds(reloaded) == canonical_rounds(svc)


def test_crash_between_ack_and_retrain_resumes(tmp_path):
    project_dir = make_project(tmp_path)
    svc = service_for(project_dir)
    complete_round(svc)

    # drop the retrain trigger: both acks hit disk, then the process dies
    svc._start_retrain = lambda: None
    first = accept_all(svc, "ann-a")
    second = accept_all(svc, "ann-b")
    assert first["status"] == second["status"] == "accepted"
    acked_ids = {first["instance_id"], second["instance_id"]}
    rounds_on_disk = (tmp_path / "proj" / "rounds.jsonl").read_text().count("\n")
    assert rounds_on_disk == 1  # the interrupted round never landed

    recovered = AnnotationService(project_dir)
    assert len(recovered.loop.records) == 2
    resumed = recovered.loop.records[1]
    assert set(resumed.queried_ids) == acked_ids
    assert {a.instance_id for a in resumed.annotations} == acked_ids
    assert recovered.loop._open is not None
    assert recovered.loop._open.round_index == 2

    # an uninterrupted control run produces the same canonical history
    control_dir = make_project(tmp_path, name="control")
    control = service_for(control_dir)
    complete_round(control)
    complete_round(control)
    assert canonical_rounds(recovered) == canonical_rounds(control)


def test_corrupted_project_raises_integrity_error(tmp_path):
    project_dir = make_project(tmp_path)
    state = tmp_path / "proj" / "state.json"
    state.write_text("{ truncated", encoding="utf-8")
    with pytest.raises(IntegrityError, match="load failed"):
        AnnotationService(project_dir)


def test_cross_module_replay_matches_service_numbers(tmp_path):
    project_dir = make_project(tmp_path)
    svc = service_for(project_dir)
    complete_round(svc)
    complete_round(svc)

    split = CorpusSplit(
        seed=tuple(read_corpus(f"{project_dir}/corpus/seed.tsv", scheme=svc.scheme, id_prefix="seed")),
        pool=tuple(read_corpus(f"{project_dir}/corpus/pool.tsv", scheme=svc.scheme, id_prefix="pool")),
        validation=tuple(
            read_corpus(f"{project_dir}/corpus/validation.tsv", scheme=svc.scheme, id_prefix="validation")
        ),
        test=tuple(read_corpus(f"{project_dir}/corpus/test.tsv", scheme=svc.scheme, id_prefix="test")),
    )
    control = ActiveLoop(split, svc.config, svc.scheme)
    for record in svc.loop.records:
        plan = control.open_round()
        assert plan.queried_ids == record.queried_ids
        control.complete_round(list(record.annotations))
    expected = [canonical_json(round_to_dict(r, canonical=True)) for r in control.records]
    assert canonical_rounds(svc) == expected


# ---------------------------------------------------------------------------
# HTTP surface


@pytest.fixture()
def client(tmp_path):
    project_dir = make_project(tmp_path)
    svc = service_for(project_dir)
    app = create_app(project_dir, service=svc)
    return TestClient(app), svc


def auth(token="token-a"):
    return {"X-Annotator-Token": token}


def test_http_health_and_auth(client):
    http, _ = client
    assert http.get("/api/health").json()["status"] == "ok"
    response = http.get("/api/next-sample", headers=auth("wrong"))
    assert response.status_code == 401
    assert response.json()["error"] == "unknown_annotator"
    assert http.get("/api/next-sample").status_code == 422  # missing header


def test_http_full_annotation_cycle(client):
    http, svc = client
    for annotator in ("token-a", "token-b"):
        sample = http.get("/api/next-sample", headers=auth(annotator)).json()
        assert sample["status"] == "ok"
        response = http.post(
            "/api/submit-feedback",
            headers=auth(annotator),
            json={
                "instance_id": sample["instance"]["id"],
                "final_tags": sample["suggested_word_tags"],
                "suggestion_theta_version": sample["theta_version"],
            },
        )
        assert response.status_code == 200
    assert response.json()["retraining_started"] is True
    svc.wait_for_retrain()
    inspection = http.get("/api/model-inspection", headers=auth()).json()
    assert len(inspection["rounds"]) == 1
    overview = http.get("/api/task-overview", headers=auth()).json()
    assert overview["rounds_completed"] == 1


def test_http_error_codes_surface(client):
    http, _ = client
    sample = http.get("/api/next-sample", headers=auth()).json()
    bad_instance = http.post(
        "/api/submit-feedback",
        headers=auth(),
        json={
            "instance_id": "pool-000099",
            "final_tags": ["O"],
            "suggestion_theta_version": 1,
        },
    )
    assert bad_instance.status_code == 422
    assert bad_instance.json()["error"] == "not_queried"
    overlapping = http.post(
        "/api/submit-feedback",
        headers=auth(),
        json={
            "instance_id": sample["instance"]["id"],
            "final_tags": sample["suggested_word_tags"],
            "rationale_spans": [[0, 1], [1, 2]],
            "suggestion_theta_version": sample["theta_version"],
        },
    )
    assert overlapping.status_code == 422
    assert overlapping.json()["error"] == "bad_record"


def test_http_metric_mode_save_export(client):
    http, _ = client
    assert http.post(
        "/api/metric-mode", headers=auth(), json={"metric_mode": "inclusive"}
    ).json() == {"metric_mode": "inclusive"}
    assert http.post("/api/save", headers=auth()).json() == {"status": "saved"}
    sample = http.get("/api/next-sample", headers=auth()).json()
    http.post(
        "/api/submit-feedback",
        headers=auth(),
        json={
            "instance_id": sample["instance"]["id"],
            "final_tags": sample["suggested_word_tags"],
            "suggestion_theta_version": sample["theta_version"],
        },
    )
    exported = http.get("/api/export-annotations", headers=auth()).json()["annotations"]
    assert len(exported) == 1
    assert exported[0]["annotation"]["instance_id"] == sample["instance"]["id"]
