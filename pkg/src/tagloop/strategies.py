"""Pool scoring strategies: LC, LTP, BALD, BatchBALD, information
density, and a seeded random baseline.

Strategy ids used across config, CLI, and API: "lc", "ltp", "bald",
"batchbald", "id", "random". EXCLUDED positions never enter the LTP
minimum or BALD sequence equality.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from collections import Counter

import numpy as np

from .corpus import TokenSequence
from .crf import CrfModel, stochastic_predict, viterbi_decode, word_marginals

__all__ = [
    "STRATEGY_IDS",
    "QueryScore",
    "SimilarityMatrix",
    "score_lc",
    "score_ltp",
    "score_bald",
    "score_id",
    "score_random",
    "build_similarity",
    "select_batch_bald",
    "select_top",
    "score_pool",
]

STRATEGY_IDS = ("lc", "ltp", "bald", "batchbald", "id", "random")


@dataclass(frozen=True)
class QueryScore:
    instance_id: str
    strategy: str
    score: float
    evidence: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Cosine similarities over a fixed pool, computed once per round."""

    ids: tuple[str, ...]
    values: np.ndarray
    beta: float = 1.0

    def density(self, instance_id: str) -> float:
        """Mean similarity of one instance to the whole pool (incl. itself)."""
        try:
            row = self.ids.index(instance_id)
        except ValueError:
            raise KeyError(f"instance {instance_id!r} not in similarity matrix") from None
        return float(self.values[row].mean())


def _word_tags(seq: TokenSequence, subtoken_tags: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(subtoken_tags[i] for i in seq.word_initial_positions)


def score_lc(model: CrfModel, seq: TokenSequence) -> QueryScore:
    """1 - P(y* | x): disagreement with the single best parse.

    Clipped into [0, 1] against rounding dust in exp(log p).
    """
    pred = viterbi_decode(model, seq)
    score = min(1.0, max(0.0, 1.0 - float(np.exp(pred.path_log_prob))))
    return QueryScore(seq.id, "lc", score, {"path_log_prob": pred.path_log_prob})


def score_ltp(model: CrfModel, seq: TokenSequence) -> QueryScore:
    """1 - min over word-initial tokens of the Viterbi tag's marginal."""
    pred = viterbi_decode(model, seq)
    unary = word_marginals(model, seq)
    tag_index = model.tag_index
    marginals = np.array(
        [unary[w, tag_index[tag]] for w, tag in enumerate(_word_tags(seq, pred.best_path))]
    )
    argmin_word = int(np.argmin(marginals))
    score = min(1.0, max(0.0, 1.0 - float(marginals[argmin_word])))
    return QueryScore(
        seq.id,
        "ltp",
        score,
        {
            "argmin_position": seq.word_initial_positions[argmin_word],
            "argmin_word": argmin_word,
            "min_marginal": float(marginals[argmin_word]),
        },
    )


def score_bald(
    model: CrfModel,
    seq: TokenSequence,
    passes: int = 10,
    rng_seed: int = 0,
    token_averaged: bool = False,
) -> QueryScore:
    """1 - (modal count)/passes over stochastic forward passes.

    Agreement is whole-sequence by default; ``token_averaged`` switches
    to the mean per-token modal fraction instead.
    """
    sampled = stochastic_predict(model, seq, passes, rng_seed)
    projected = [_word_tags(seq, tags) for tags in sampled]
    histogram = Counter(" ".join(tags) for tags in projected)
    if token_averaged:
        per_token = []
        for w in range(seq.n_words):
            column = Counter(tags[w] for tags in projected)
            per_token.append(1.0 - column.most_common(1)[0][1] / passes)
        score = float(np.mean(per_token))
    else:
        score = 1.0 - histogram.most_common(1)[0][1] / passes
    return QueryScore(
        seq.id,
        "bald",
        score,
        {"passes": passes, "histogram": dict(histogram)},
    )


def score_id(
    model: CrfModel,
    seq: TokenSequence,
    sim: SimilarityMatrix,
    base_strategy=score_ltp,
) -> QueryScore:
    """base(x) * density(x)^beta; base is LTP unless swapped out."""
    base = base_strategy(model, seq)
    density = sim.density(seq.id)
    return QueryScore(
        seq.id,
        "id",
        base.score * density**sim.beta,
        {"base": base.score, "density": density, "beta": sim.beta},
    )


def score_random(seq: TokenSequence, rng_seed: int = 0) -> QueryScore:
    """Uniform [0, 1) score, reproducible per (seed, instance id)."""
    digest = hashlib.blake2b(seq.id.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng((rng_seed, int.from_bytes(digest, "big")))
    return QueryScore(seq.id, "random", float(rng.random()), {})


def build_similarity(pool: list[TokenSequence], beta: float = 1.0) -> SimilarityMatrix:
    """Cosine over L2-normalized bags of word-initial subtoken strings."""
    vocab: dict[str, int] = {}
    for seq in pool:
        for i in seq.word_initial_positions:
            vocab.setdefault(seq.subtokens[i], len(vocab))
    counts = np.zeros((len(pool), len(vocab)))
    for row, seq in enumerate(pool):
        for i in seq.word_initial_positions:
            counts[row, vocab[seq.subtokens[i]]] += 1.0
    norms = np.linalg.norm(counts, axis=1, keepdims=True)
    np.divide(counts, norms, out=counts, where=norms > 0)
    return SimilarityMatrix(
        ids=tuple(seq.id for seq in pool),
        values=counts @ counts.T,
        beta=beta,
    )


def select_batch_bald(
    model: CrfModel,
    pool: list[TokenSequence],
    batch_size: int,
    passes: int = 10,
    rng_seed: int = 0,
    with_scores: bool = False,
) -> list[str] | list[tuple[str, float]]:
    """Greedy joint-disagreement selection with shared dropout seeds.

    Each step adds the candidate maximizing 1 - modal(tuple of sampled
    sequences across the selected set)/passes; ties break to the lowest
    instance id. Every instance reuses the same seeds rng_seed..+passes,
    so duplicates sample identically and add zero joint disagreement.
    ``with_scores`` also returns the joint score at each greedy step.
    """
    if batch_size > len(pool):
        raise ValueError(f"batch_size {batch_size} exceeds pool size {len(pool)}")
    if batch_size == 0:
        return []
    ordered = sorted(pool, key=lambda s: s.id)
    samples = {
        seq.id: [_word_tags(seq, tags) for tags in stochastic_predict(model, seq, passes, rng_seed)]
        for seq in ordered
    }
    selected: list[tuple[str, float]] = []
    taken: set[str] = set()
    chosen_tuples: list[tuple] = [() for _ in range(passes)]
    while len(selected) < batch_size:
        best_id, best_score = None, -1.0
        for seq in ordered:
            if seq.id in taken:
                continue
            joint = Counter(
                chosen_tuples[k] + (samples[seq.id][k],) for k in range(passes)
            )
            score = 1.0 - joint.most_common(1)[0][1] / passes
            if score > best_score:
                best_id, best_score = seq.id, score
        selected.append((best_id, best_score))
        taken.add(best_id)
        chosen_tuples = [chosen_tuples[k] + (samples[best_id][k],) for k in range(passes)]
    if with_scores:
        return selected
    return [instance_id for instance_id, _ in selected]


def select_top(scores: list[QueryScore], batch_size: int) -> list[str]:
    """Top-scoring instance ids; ties broken by lowest id."""
    if batch_size > len(scores):
        raise ValueError(f"batch_size {batch_size} exceeds scored pool size {len(scores)}")
    ranked = sorted(scores, key=lambda q: (-q.score, q.instance_id))
    return [q.instance_id for q in ranked[:batch_size]]


def score_pool(
    model: CrfModel,
    pool: list[TokenSequence],
    strategy: str,
    passes: int = 10,
    rng_seed: int = 0,
    sim: SimilarityMatrix | None = None,
    token_averaged_bald: bool = False,
) -> list[QueryScore]:
    """Score every pool instance under one strategy id.

    "batchbald" has no standalone per-instance score; its pool scores
    are BALD scores and the joint selection happens in
    ``select_batch_bald``.
    """
    if strategy not in STRATEGY_IDS:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGY_IDS}")
    if strategy == "lc":
        return [score_lc(model, seq) for seq in pool]
    if strategy == "ltp":
        return [score_ltp(model, seq) for seq in pool]
    if strategy in ("bald", "batchbald"):
        return [
            score_bald(model, seq, passes, rng_seed, token_averaged_bald) for seq in pool
        ]
    if strategy == "id":
        if sim is None:
            sim = build_similarity(pool)
        return [score_id(model, seq, sim) for seq in pool]
    return [score_random(seq, rng_seed) for seq in pool]
