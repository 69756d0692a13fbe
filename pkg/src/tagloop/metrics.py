"""Evaluation and human-factor measures.

Exclusive quality is entity-level exact-span micro P/R/F1 on held-out
data; inclusive quality is token accuracy over the jointly annotated
corpus (human tokens plus model tokens). Workload counts suggestion
edits; consistency is raw agreement plus Cohen's kappa per annotator
pair.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

from .corpus import OUTSIDE, TokenSequence
from .crf import CrfModel, viterbi_decode
from .records import AnnotationRecord

__all__ = [
    "Metrics",
    "ConsistencyReport",
    "extract_entities",
    "entity_micro_prf",
    "evaluate_model",
    "token_accuracy",
    "model_token_correct",
    "count_corrections",
    "cohen_kappa",
    "compute_consistency",
]


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    true_positives: int
    false_positives: int
    false_negatives: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
        }


@dataclass(frozen=True)
class ConsistencyReport:
    annotator_a: str
    annotator_b: str
    overlap_instances: int
    raw_agreement: float
    kappa: float


def extract_entities(word_tags) -> set[tuple[int, int, str]]:
    """Half-open (start, end, type) spans from word-level BIO tags.

    An I- tag that does not continue a same-type entity opens a new one
    (conlleval-style recovery), so any tag sequence decodes totally.
    """
    spans = set()
    start, etype = None, None

    def close(end):
        nonlocal start, etype
        if start is not None:
            spans.add((start, end, etype))
        start, etype = None, None

    for i, tag in enumerate(word_tags):
        if tag == OUTSIDE:
            close(i)
        elif tag.startswith("B-"):
            close(i)
            start, etype = i, tag[2:]
        elif tag.startswith("I-"):
            if etype != tag[2:]:
                close(i)
                start, etype = i, tag[2:]
        else:
            raise ValueError(f"not a BIO tag: {tag!r}")
    close(len(tuple(word_tags)))
    return spans


def entity_micro_prf(gold_tag_lists, predicted_tag_lists) -> Metrics:
    """Micro-averaged exact-span match over many sequences.

    Empty denominators follow the undefined-as-0 convention.
    """
    tp = fp = fn = 0
    for gold, pred in zip(gold_tag_lists, predicted_tag_lists, strict=True):
        gold_spans = extract_entities(gold)
        pred_spans = extract_entities(pred)
        tp += len(gold_spans & pred_spans)
        fp += len(pred_spans - gold_spans)
        fn += len(gold_spans - pred_spans)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision, recall, f1, tp, fp, fn)


def _predicted_word_tags(model: CrfModel, seq: TokenSequence) -> list[str]:
    path = viterbi_decode(model, seq).best_path
    return [path[i] for i in seq.word_initial_positions]


def evaluate_model(model: CrfModel, data: list[TokenSequence]) -> Metrics:
    """Entity-level micro P/R/F1 of Viterbi decodes against gold."""
    golds, preds = [], []
    for seq in data:
        if seq.gold_tags is None:
            raise ValueError(f"sequence {seq.id} has no gold tags to evaluate against")
        golds.append(seq.word_tags)
        preds.append(_predicted_word_tags(model, seq))
    return entity_micro_prf(golds, preds)


def token_accuracy(gold_tag_lists, predicted_tag_lists) -> float:
    correct = total = 0
    for gold, pred in zip(gold_tag_lists, predicted_tag_lists, strict=True):
        for g, p in zip(gold, pred, strict=True):
            correct += g == p
            total += 1
    return correct / total if total else 0.0


def model_token_correct(model: CrfModel, data: list[TokenSequence]) -> tuple[int, int]:
    """(correct, total) word-initial tokens under Viterbi vs gold."""
    correct = total = 0
    for seq in data:
        gold = seq.word_tags
        pred = _predicted_word_tags(model, seq)
        correct += sum(g == p for g, p in zip(gold, pred, strict=True))
        total += len(gold)
    return correct, total


def count_corrections(suggested_tags, final_tags) -> int:
    """Word-initial positions whose tag the annotator changed."""
    suggested, final = tuple(suggested_tags), tuple(final_tags)
    if len(suggested) != len(final):
        raise ValueError(
            f"suggestion has {len(suggested)} word tags but annotation has {len(final)}"
        )
    return sum(s != f for s, f in zip(suggested, final))


def cohen_kappa(tags_a, tags_b) -> tuple[float, float]:
    """(raw agreement, kappa) over paired tag assignments.

    p_e comes from each annotator's own marginal tag distribution.
    Degenerate p_e = 1 (both constant, same tag) fixes kappa at 1.
    """
    tags_a, tags_b = tuple(tags_a), tuple(tags_b)
    if len(tags_a) != len(tags_b):
        raise ValueError("annotators rated different numbers of positions")
    if not tags_a:
        raise ValueError("no positions to compare")
    n = len(tags_a)
    p_o = sum(a == b for a, b in zip(tags_a, tags_b)) / n
    marg_a = Counter(tags_a)
    marg_b = Counter(tags_b)
    p_e = sum(marg_a[t] * marg_b.get(t, 0) for t in marg_a) / (n * n)
    if p_e >= 1.0:
        return p_o, 1.0
    return p_o, (p_o - p_e) / (1.0 - p_e)


def compute_consistency(records: list[AnnotationRecord]) -> list[ConsistencyReport]:
    """Pairwise agreement for all annotator pairs sharing instances.

    Positions of shared instances are pooled per pair before computing
    agreement and kappa. Raises when no pair annotated a common
    instance.
    """
    by_annotator: dict[str, dict[str, AnnotationRecord]] = {}
    for record in records:
        by_annotator.setdefault(record.annotator_id, {})[record.instance_id] = record
    reports = []
    for name_a, name_b in itertools.combinations(sorted(by_annotator), 2):
        shared = sorted(set(by_annotator[name_a]) & set(by_annotator[name_b]))
        if not shared:
            continue
        tags_a: list[str] = []
        tags_b: list[str] = []
        for instance_id in shared:
            rec_a = by_annotator[name_a][instance_id]
            rec_b = by_annotator[name_b][instance_id]
            if len(rec_a.final_tags) != len(rec_b.final_tags):
                raise ValueError(
                    f"annotators {name_a} and {name_b} disagree on the length of "
                    f"{instance_id}"
                )
            tags_a.extend(rec_a.final_tags)
            tags_b.extend(rec_b.final_tags)
        raw, kappa = cohen_kappa(tags_a, tags_b)
        reports.append(ConsistencyReport(name_a, name_b, len(shared), raw, kappa))
    if not reports:
        raise ValueError("no overlap")
    return reports
