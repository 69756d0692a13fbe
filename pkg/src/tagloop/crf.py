"""Linear-chain CRF over word-initial positions with exact inference.

The lattice runs over word-initial subtokens only: EXCLUDED positions
are deterministic (probability one on the sentinel) and transitions
bridge them transparently, so they contribute nothing to the partition
function, the loss, or any marginal. All probability math is done in
log space with log-sum-exp.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .corpus import EXCLUDED, LabelScheme, TokenSequence
from .features import FeatureEncoder

__all__ = [
    "InferenceError",
    "TrainConfig",
    "Prediction",
    "CrfModel",
    "viterbi_decode",
    "token_marginals",
    "word_marginals",
    "sequence_log_prob",
    "stochastic_predict",
    "train",
    "nll_objective",
    "objective_gradient",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "tagloop-model"
MODEL_FORMAT_VERSION = 1


class InferenceError(RuntimeError):
    """Non-finite value inside exact inference; indicates a bug."""


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch SGD settings. L2 is applied as a proximal shrinkage
    step so arbitrarily large strengths stay numerically stable."""

    epochs: int = 20
    learning_rate: float = 0.2
    l2: float = 1e-4
    batch_size: int = 8
    rng_seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class Prediction:
    """Decoded output for one sequence (subtoken-aligned)."""

    best_path: tuple[str, ...]
    path_log_prob: float
    token_marginals: np.ndarray | None = None
    saliency: np.ndarray | None = None


@dataclass
class CrfModel:
    """Feature weights plus transition weights over the decode tag set.

    ``transition_weights`` is (S+2, S+2) with virtual START (index S) and
    STOP (index S+1) states. A model instance is treated as an immutable
    snapshot: ``train`` returns a new one with ``theta_version`` bumped.
    """

    scheme: LabelScheme
    encoder: FeatureEncoder
    emission_weights: np.ndarray
    transition_weights: np.ndarray
    hard_bio_constraints: bool = True
    theta_version: int = 0

    @classmethod
    def initialize(
        cls,
        scheme: LabelScheme,
        encoder: FeatureEncoder,
        hard_bio_constraints: bool = True,
    ) -> "CrfModel":
        if not encoder.frozen:
            raise ValueError("encoder must be frozen before model initialization")
        n_tags = len(scheme.decode_tags)
        return cls(
            scheme=scheme,
            encoder=encoder,
            emission_weights=np.zeros((encoder.n_features, n_tags)),
            transition_weights=np.zeros((n_tags + 2, n_tags + 2)),
            hard_bio_constraints=hard_bio_constraints,
            theta_version=0,
        )

    @property
    def n_tags(self) -> int:
        return len(self.scheme.decode_tags)

    @property
    def tag_index(self) -> dict[str, int]:
        return {tag: i for i, tag in enumerate(self.scheme.decode_tags)}

    def copy(self) -> "CrfModel":
        return replace(
            self,
            emission_weights=self.emission_weights.copy(),
            transition_weights=self.transition_weights.copy(),
        )


def allowed_transitions(scheme: LabelScheme) -> np.ndarray:
    """Boolean (S+2, S+2) matrix of legal BIO transitions.

    I-e is reachable only from B-e or I-e; everything else (including
    START into I-e) is forbidden. START/STOP structural cells that the
    lattice never reads are left permissive.
    """
    tags = scheme.decode_tags
    n = len(tags)
    allowed = np.ones((n + 2, n + 2), dtype=bool)
    for t, tag in enumerate(tags):
        if not tag.startswith("I-"):
            continue
        etype = tag[2:]
        legal_sources = {f"B-{etype}", f"I-{etype}"}
        for s in range(n + 2):
            source = tags[s] if s < n else None
            allowed[s, t] = source in legal_sources
    return allowed


def effective_transitions(model: CrfModel) -> np.ndarray:
    if not model.hard_bio_constraints:
        return model.transition_weights
    return np.where(allowed_transitions(model.scheme), model.transition_weights, -np.inf)


def emission_matrix(
    model: CrfModel,
    words: tuple[str, ...],
    keep_masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Per-word emission scores; ``keep_masks`` optionally drops features."""
    feats = model.encoder.encode(words)
    scores = np.zeros((len(words), model.n_tags))
    for i, idx in enumerate(feats):
        if keep_masks is not None:
            idx = idx[keep_masks[i]]
        if idx.size:
            scores[i] = model.emission_weights[idx].sum(axis=0)
    return scores


# ---------------------------------------------------------------------------
# Lattice primitives over (emissions, transitions); no corpus knowledge.


def lattice_viterbi(emissions: np.ndarray, trans: np.ndarray) -> tuple[list[int], float]:
    """Best tag index path and its unnormalized score.

    Ties resolve to the lowest tag index (argmax picks the first max).
    """
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    delta = trans[start, :n_tags] + emissions[0]
    back = np.zeros((n, n_tags), dtype=np.intp)
    inner = trans[:n_tags, :n_tags]
    for i in range(1, n):
        scores = delta[:, None] + inner + emissions[i][None, :]
        back[i] = np.argmax(scores, axis=0)
        delta = scores[back[i], np.arange(n_tags)]
    final = delta + trans[:n_tags, stop]
    last = int(np.argmax(final))
    path = [last]
    for i in range(n - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    path.reverse()
    return path, float(final[last])


def lattice_forward(emissions: np.ndarray, trans: np.ndarray) -> tuple[np.ndarray, float]:
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    alpha = np.empty((n, n_tags))
    alpha[0] = trans[start, :n_tags] + emissions[0]
    inner = trans[:n_tags, :n_tags]
    for i in range(1, n):
        alpha[i] = logsumexp(alpha[i - 1][:, None] + inner, axis=0) + emissions[i]
    log_z = float(logsumexp(alpha[-1] + trans[:n_tags, stop]))
    return alpha, log_z


def lattice_backward(emissions: np.ndarray, trans: np.ndarray) -> np.ndarray:
    n, n_tags = emissions.shape
    stop = n_tags + 1
    beta = np.empty((n, n_tags))
    beta[-1] = trans[:n_tags, stop]
    inner = trans[:n_tags, :n_tags]
    for i in range(n - 2, -1, -1):
        beta[i] = logsumexp(inner + (emissions[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def lattice_forward_backward(
    emissions: np.ndarray, trans: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partition, unary marginals (n, S), pairwise marginals (n-1, S, S)."""
    n, n_tags = emissions.shape
    alpha, log_z = lattice_forward(emissions, trans)
    if not np.isfinite(log_z):
        raise InferenceError("non-finite log partition")
    beta = lattice_backward(emissions, trans)
    unary = np.exp(alpha + beta - log_z)
    inner = trans[:n_tags, :n_tags]
    pairwise = np.empty((max(n - 1, 0), n_tags, n_tags))
    for i in range(n - 1):
        pairwise[i] = np.exp(
            alpha[i][:, None] + inner + (emissions[i + 1] + beta[i + 1])[None, :] - log_z
        )
    if not (np.isfinite(unary).all() and np.isfinite(pairwise).all()):
        raise InferenceError("non-finite marginals")
    return log_z, unary, pairwise


def lattice_path_score(emissions: np.ndarray, trans: np.ndarray, path: list[int]) -> float:
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    score = trans[start, path[0]] + emissions[0, path[0]]
    for i in range(1, n):
        score = score + trans[path[i - 1], path[i]] + emissions[i, path[i]]
    return float(score + trans[path[-1], stop])


# ---------------------------------------------------------------------------
# Sequence-level operations.


def _expand_to_subtokens(seq: TokenSequence, word_tags: list[str]) -> tuple[str, ...]:
    out = []
    word = -1
    for initial in seq.is_word_initial:
        if initial:
            word += 1
            out.append(word_tags[word])
        else:
            out.append(EXCLUDED)
    return tuple(out)


def viterbi_decode(model: CrfModel, seq: TokenSequence) -> Prediction:
    """Highest-probability tag sequence and its log probability."""
    words = seq.words
    emissions = emission_matrix(model, words)
    trans = effective_transitions(model)
    path, score = lattice_viterbi(emissions, trans)
    _, log_z = lattice_forward(emissions, trans)
    tags = [model.scheme.decode_tags[t] for t in path]
    return Prediction(
        best_path=_expand_to_subtokens(seq, tags),
        path_log_prob=score - log_z,
    )


def word_marginals(model: CrfModel, seq: TokenSequence) -> np.ndarray:
    """Per-word tag distribution (n_words, S) from forward-backward."""
    emissions = emission_matrix(model, seq.words)
    _, unary, _ = lattice_forward_backward(emissions, effective_transitions(model))
    return unary


def token_marginals(model: CrfModel, seq: TokenSequence) -> np.ndarray:
    """Per-subtoken distribution over the full tag set (EXCLUDED last).

    Word-initial rows carry the CRF marginals; every other row is a
    point mass on EXCLUDED. Each row sums to one.
    """
    unary = word_marginals(model, seq)
    n_bio = len(model.scheme.bio_tags)
    out = np.zeros((len(seq), n_bio))
    word = -1
    for i, initial in enumerate(seq.is_word_initial):
        if initial:
            word += 1
            out[i, : model.n_tags] = unary[word]
        else:
            out[i, -1] = 1.0
    return out


def _word_level_tag_indices(model: CrfModel, seq: TokenSequence, tags) -> list[int]:
    tags = tuple(tags)
    if len(tags) == len(seq):
        word_tags = []
        for i, tag in enumerate(tags):
            if seq.is_word_initial[i]:
                word_tags.append(tag)
            elif tag != EXCLUDED:
                raise ValueError(f"position {i} is not word-initial; expected {EXCLUDED}, got {tag!r}")
    elif len(tags) == seq.n_words:
        word_tags = list(tags)
    else:
        raise ValueError(
            f"tag sequence length {len(tags)} matches neither {len(seq)} subtokens "
            f"nor {seq.n_words} words"
        )
    index = model.tag_index
    try:
        return [index[t] for t in word_tags]
    except KeyError as err:
        raise ValueError(f"tag {err.args[0]!r} is not in the decode tag set") from None


def sequence_log_prob(model: CrfModel, seq: TokenSequence, tags) -> float:
    """log P(tags | x); -inf when the sequence violates hard constraints.

    ``tags`` may be subtoken-level (EXCLUDED on non-initial positions)
    or word-level.
    """
    path = _word_level_tag_indices(model, seq, tags)
    emissions = emission_matrix(model, seq.words)
    trans = effective_transitions(model)
    score = lattice_path_score(emissions, trans, path)
    if score == -np.inf:
        return -np.inf
    _, log_z = lattice_forward(emissions, trans)
    return score - log_z


def stochastic_predict(
    model: CrfModel, seq: TokenSequence, passes: int, rng_seed: int
) -> list[tuple[str, ...]]:
    """Viterbi decodes under independent feature-dropout masks.

    Pass ``k`` is seeded with ``rng_seed + k``, dropping each active
    feature with probability ``encoder.dropout_rate``.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    words = seq.words
    feats = model.encoder.encode(words)
    rate = model.encoder.dropout_rate
    trans = effective_transitions(model)
    outputs: list[tuple[str, ...]] = []
    for k in range(passes):
        if rate > 0.0:
            rng = np.random.default_rng(rng_seed + k)
            masks = [rng.random(idx.size) >= rate for idx in feats]
            emissions = emission_matrix(model, words, keep_masks=masks)
        else:
            emissions = emission_matrix(model, words)
        path, _ = lattice_viterbi(emissions, trans)
        tags = [model.scheme.decode_tags[t] for t in path]
        outputs.append(_expand_to_subtokens(seq, tags))
    return outputs


# ---------------------------------------------------------------------------
# Training.


def _trainable(data: list[TokenSequence]) -> list[TokenSequence]:
    usable = []
    for seq in data:
        if seq.gold_tags is None:
            raise ValueError(f"sequence {seq.id} has no gold tags")
        if not any(t != EXCLUDED for t in seq.gold_tags):
            warnings.warn(f"skipping {seq.id}: only EXCLUDED positions", stacklevel=3)
            continue
        usable.append(seq)
    return usable


def _sequence_nll_grad(
    model: CrfModel,
    seq: TokenSequence,
    trans: np.ndarray,
    grad_e: np.ndarray | None,
    grad_t: np.ndarray | None,
) -> float:
    """Accumulate one sequence's NLL gradient in place; returns its NLL."""
    words = seq.words
    gold = _word_level_tag_indices(model, seq, seq.gold_tags)
    feats = model.encoder.encode(words)
    emissions = emission_matrix(model, words)
    n, n_tags = emissions.shape
    start, stop = n_tags, n_tags + 1
    gold_score = lattice_path_score(emissions, trans, gold)
    if not np.isfinite(gold_score):
        raise ValueError(f"gold tags of {seq.id} violate hard BIO constraints")
    log_z, unary, pairwise = lattice_forward_backward(emissions, trans)
    nll = log_z - gold_score
    if grad_e is None or grad_t is None:
        return nll
    for i, idx in enumerate(feats):
        if idx.size:
            grad_e[idx] += unary[i]
            grad_e[idx, gold[i]] -= 1.0
    grad_t[start, :n_tags] += unary[0]
    grad_t[start, gold[0]] -= 1.0
    grad_t[:n_tags, stop] += unary[-1]
    grad_t[gold[-1], stop] -= 1.0
    if n > 1:
        grad_t[:n_tags, :n_tags] += pairwise.sum(axis=0)
        for i in range(1, n):
            grad_t[gold[i - 1], gold[i]] -= 1.0
    return nll


def objective_gradient(
    model: CrfModel, data: list[TokenSequence], l2: float = 0.0
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean NLL plus L2 penalty, with its exact analytic gradient."""
    usable = _trainable(list(data))
    if not usable:
        raise ValueError("empty training data")
    trans = effective_transitions(model)
    grad_e = np.zeros_like(model.emission_weights)
    grad_t = np.zeros_like(model.transition_weights)
    total = 0.0
    for seq in usable:
        total += _sequence_nll_grad(model, seq, trans, grad_e, grad_t)
    scale = 1.0 / len(usable)
    loss = total * scale
    grad_e *= scale
    grad_t *= scale
    if l2 > 0.0:
        loss += 0.5 * l2 * (
            float(np.sum(model.emission_weights**2))
            + float(np.sum(model.transition_weights**2))
        )
        grad_e += l2 * model.emission_weights
        grad_t += l2 * model.transition_weights
    return loss, grad_e, grad_t


def nll_objective(model: CrfModel, data: list[TokenSequence], l2: float = 0.0) -> float:
    usable = _trainable(list(data))
    if not usable:
        raise ValueError("empty training data")
    trans = effective_transitions(model)
    total = sum(_sequence_nll_grad(model, seq, trans, None, None) for seq in usable)
    loss = total / len(usable)
    if l2 > 0.0:
        loss += 0.5 * l2 * (
            float(np.sum(model.emission_weights**2))
            + float(np.sum(model.transition_weights**2))
        )
    return loss


def train(model: CrfModel, data: list[TokenSequence], opts: TrainConfig = TrainConfig()) -> CrfModel:
    """Mini-batch SGD on the conditional log-likelihood.

    Returns a new snapshot with ``theta_version`` incremented; the input
    model is untouched. ``opts.epochs == 0`` returns the input unchanged.
    """
    if not data:
        raise ValueError("empty training data")
    usable = _trainable(list(data))
    if not usable:
        raise ValueError("no trainable sequences")
    if opts.epochs == 0:
        return model
    out = model.copy()
    rng = np.random.default_rng(opts.rng_seed)
    lr = opts.learning_rate
    shrink = 1.0 / (1.0 + lr * opts.l2)
    for _ in range(opts.epochs):
        order = rng.permutation(len(usable)) if opts.shuffle else np.arange(len(usable))
        for lo in range(0, len(usable), opts.batch_size):
            batch = [usable[j] for j in order[lo : lo + opts.batch_size]]
            trans = effective_transitions(out)
            grad_e = np.zeros_like(out.emission_weights)
            grad_t = np.zeros_like(out.transition_weights)
            for seq in batch:
                _sequence_nll_grad(out, seq, trans, grad_e, grad_t)
            scale = lr / len(batch)
            out.emission_weights = (out.emission_weights - scale * grad_e) * shrink
            out.transition_weights = (out.transition_weights - scale * grad_t) * shrink
    out.theta_version = model.theta_version + 1
    return out


# ---------------------------------------------------------------------------
# Persistence: canonical JSON, round-trip exact (floats keep full repr).


def model_to_dict(model: CrfModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "scheme": {
            "entity_types": list(model.scheme.entity_types),
            "mapping": [list(rule) for rule in model.scheme.mapping],
        },
        "encoder": model.encoder.to_dict(),
        "emission_weights": model.emission_weights.tolist(),
        "transition_weights": model.transition_weights.tolist(),
        "hard_bio_constraints": model.hard_bio_constraints,
        "theta_version": model.theta_version,
    }


def model_from_dict(payload: dict) -> CrfModel:
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError("not a tagloop model file")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {payload.get('format_version')!r}")
    scheme = LabelScheme(
        entity_types=tuple(payload["scheme"]["entity_types"]),
        mapping=tuple(tuple(rule) for rule in payload["scheme"]["mapping"]),
    )
    return CrfModel(
        scheme=scheme,
        encoder=FeatureEncoder.from_dict(payload["encoder"]),
        emission_weights=np.array(payload["emission_weights"], dtype=float).reshape(
            len(payload["encoder"]["vocab"]), len(scheme.decode_tags)
        ),
        transition_weights=np.array(payload["transition_weights"], dtype=float),
        hard_bio_constraints=payload["hard_bio_constraints"],
        theta_version=payload["theta_version"],
    )


def save_model(model: CrfModel, path) -> None:
    with open(str(path), "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(model), handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_model(path) -> CrfModel:
    with open(str(path), encoding="utf-8") as handle:
        return model_from_dict(json.load(handle))
