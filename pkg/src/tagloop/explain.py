"""Token attribution for a predicted tag: occlusion and gradient methods.

Both methods explain P(y_t = tag | x) where ``tag`` is the Viterbi tag
at a chosen word-initial position t and the probability is the token
marginal. Scores come back per subtoken, every piece of a word carrying
that word's score.
"""

from __future__ import annotations

import numpy as np

from .corpus import TokenSequence
from .crf import (
    CrfModel,
    effective_transitions,
    emission_matrix,
    lattice_forward_backward,
    lattice_viterbi,
)
from .features import UNK_WORD

__all__ = ["explain_occlusion", "explain_gradient", "target_log_prob_gradient"]


def _target_word(seq: TokenSequence, target_position: int) -> int:
    if not 0 <= target_position < len(seq):
        raise ValueError(f"target position {target_position} out of range")
    if not seq.is_word_initial[target_position]:
        raise ValueError(f"target position {target_position} is EXCLUDED (not word-initial)")
    return seq.word_index[target_position]


def _broadcast_to_subtokens(seq: TokenSequence, word_scores: np.ndarray) -> np.ndarray:
    return np.array([word_scores[w] for w in seq.word_index])


def explain_occlusion(model: CrfModel, seq: TokenSequence, target_position: int) -> np.ndarray:
    """saliency[j] = P(tag at t | x) - P(tag at t | x with word j occluded).

    Occlusion swaps position j's feature column for the one extracted
    with the unknown word in that slot; all lexical strings derived from
    the placeholder are out of vocabulary, so only context features
    survive at j. The target word itself is occluded like any other.
    """
    t_word = _target_word(seq, target_position)
    words = seq.words
    trans = effective_transitions(model)
    emissions = emission_matrix(model, words)
    path, _ = lattice_viterbi(emissions, trans)
    _, unary, _ = lattice_forward_backward(emissions, trans)
    y_hat = path[t_word]
    base = unary[t_word, y_hat]
    scores = np.zeros(len(words))
    for j in range(len(words)):
        occluded = list(words)
        occluded[j] = UNK_WORD
        idx = model.encoder.encode(tuple(occluded))[j]
        patched = emissions.copy()
        patched[j] = model.emission_weights[idx].sum(axis=0) if idx.size else 0.0
        _, occ_unary, _ = lattice_forward_backward(patched, trans)
        scores[j] = base - occ_unary[t_word, y_hat]
    return _broadcast_to_subtokens(seq, scores)


def explain_gradient(model: CrfModel, seq: TokenSequence, target_position: int) -> np.ndarray:
    """Gradient-times-input saliency, exact for the linear model.

    saliency[j] = sum over tags s of emission_score[j][s] *
    d log P(tag at t | x) / d emission_score[j][s]; the derivative is the
    clamped-minus-free marginal at j, so no finite differences appear.
    """
    t_word = _target_word(seq, target_position)
    words = seq.words
    trans = effective_transitions(model)
    emissions = emission_matrix(model, words)
    path, _ = lattice_viterbi(emissions, trans)
    diff, _ = _marginal_shift(emissions, trans, t_word, path[t_word])
    scores = np.einsum("ij,ij->i", emissions, diff)
    return _broadcast_to_subtokens(seq, scores)


def _marginal_shift(
    emissions: np.ndarray, trans: np.ndarray, t_word: int, y_hat: int
) -> tuple[np.ndarray, dict]:
    """Unary marginal change from clamping position t_word to y_hat.

    Returns (clamped - free) unary marginals, which equal the exact
    derivative of log P(y_t = y_hat | x) w.r.t. each emission score,
    plus the pieces needed for the transition-weight derivative.
    """
    log_z, unary, pairwise = lattice_forward_backward(emissions, trans)
    clamped = emissions.copy()
    keep = clamped[t_word, y_hat]
    clamped[t_word, :] = -np.inf
    clamped[t_word, y_hat] = keep
    log_zc, unary_c, pairwise_c = lattice_forward_backward(clamped, trans)
    extras = {
        "log_prob": log_zc - log_z,
        "unary": unary,
        "unary_c": unary_c,
        "pairwise": pairwise,
        "pairwise_c": pairwise_c,
    }
    return unary_c - unary, extras


def target_log_prob_gradient(
    model: CrfModel, seq: TokenSequence, target_position: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """log P(tag at t | x) and its exact gradient w.r.t. all weights.

    The emission gradient scatters the clamped-minus-free marginals over
    each position's active features; finite differences on any single
    weight reproduce these entries.
    """
    t_word = _target_word(seq, target_position)
    words = seq.words
    trans = effective_transitions(model)
    emissions = emission_matrix(model, words)
    path, _ = lattice_viterbi(emissions, trans)
    diff, extras = _marginal_shift(emissions, trans, t_word, path[t_word])
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    feats = model.encoder.encode(words)
    grad_e = np.zeros_like(model.emission_weights)
    for i, idx in enumerate(feats):
        if idx.size:
            grad_e[idx] += diff[i]
    grad_t = np.zeros_like(model.transition_weights)
    grad_t[start, :n_tags] = extras["unary_c"][0] - extras["unary"][0]
    grad_t[:n_tags, stop] = extras["unary_c"][-1] - extras["unary"][-1]
    if n > 1:
        grad_t[:n_tags, :n_tags] = (extras["pairwise_c"] - extras["pairwise"]).sum(axis=0)
    return float(extras["log_prob"]), grad_e, grad_t
