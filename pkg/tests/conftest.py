"""Shared builders for small hand-controllable models and sentences."""

import numpy as np
import pytest

from tagloop import (
    CrfModel,
    FeatureEncoder,
    GeneratorConfig,
    LabelScheme,
    TokenSequence,
    generate_synthetic_corpus,
)


def make_scheme(n_types=1):
    names = ("Alpha", "Beta", "Gamma", "Delta")[:n_types]
    return LabelScheme(entity_types=names, mapping=())


def word_sequence(words, tags=None, seq_id="t-000000"):
    """Sentence with exactly one subtoken per word (nothing EXCLUDED)."""
    n = len(words)
    return TokenSequence(
        id=seq_id,
        subtokens=tuple(words),
        word_index=tuple(range(n)),
        is_word_initial=(True,) * n,
        gold_tags=tuple(tags) if tags is not None else None,
    )


def word_model(sentences, scheme, hard_bio_constraints=False, dropout_rate=0.0):
    """Model over word-identity features only.

    With the single "word" template each position activates exactly the
    feature "w=<word>", so emission rows can be written directly via
    ``set_word_scores``.
    """
    encoder = FeatureEncoder(templates=("word",), dropout_rate=dropout_rate)
    encoder.fit([tuple(words) for words in sentences]).freeze()
    return CrfModel.initialize(scheme, encoder, hard_bio_constraints=hard_bio_constraints)


def set_word_scores(model, word, scores):
    row = model.encoder.vocab[f"w={word}"]
    model.emission_weights[row, :] = np.asarray(scores, dtype=float)


def randomize(model, rng, scale=1.0):
    model.emission_weights[:] = rng.normal(scale=scale, size=model.emission_weights.shape)
    model.transition_weights[:] = rng.normal(scale=scale, size=model.transition_weights.shape)
    return model


def random_word_model(rng, n_types=2, vocab_size=6, hard_bio_constraints=True, scale=1.0):
    scheme = make_scheme(n_types)
    words = tuple(f"w{k}" for k in range(vocab_size))
    model = word_model([words], scheme, hard_bio_constraints=hard_bio_constraints)
    randomize(model, rng, scale)
    return model, words


def random_sentence(rng, words, max_len=5, seq_id="t-000000"):
    n = int(rng.integers(1, max_len + 1))
    picks = [words[int(rng.integers(len(words)))] for _ in range(n)]
    return word_sequence(picks, seq_id=seq_id)


def legal_word_tags(rng, scheme, n_words):
    """Random tag sequence respecting BIO continuation rules."""
    tags = []
    for i in range(n_words):
        options = ["O"] + [f"B-{t}" for t in scheme.entity_types]
        if i and tags[-1] != "O":
            etype = tags[-1].split("-", 1)[1]
            options.append(f"I-{etype}")
        tags.append(options[int(rng.integers(len(options)))])
    return tags


@pytest.fixture(scope="session")
def tiny_split():
    """Small synthetic split reused by the slower integration tests."""
    config = GeneratorConfig(n_seed=4, n_pool=16, n_validation=10, n_test=24)
    return generate_synthetic_corpus(config, rng_seed=11), config.scheme()
