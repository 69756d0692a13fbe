"""Deterministic synthetic corpus generator.

Emits two pattern-parallel "languages" with disjoint lexicons so the
source-to-target transfer protocol can be exercised without licensed
clinical data. Entity surface forms share type-specific affixes and
shapes across the two languages (drug names end in -mycin/-cillin/...,
strengths look like 250mg), which is the only signal that survives a
language switch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    DEFAULT_SPLITTER,
    CorpusError,
    CorpusSplit,
    LabelScheme,
    SubwordSplitter,
    TokenSequence,
    apply_subtoken_rule,
)

__all__ = ["GeneratorConfig", "generate_synthetic_corpus", "default_lexicons", "default_fillers"]

SYNTH_ENTITY_TYPES = ("Drug", "Strength", "Diagnosis", "Anatomy")

_SUFFIXES = {
    "Drug": ("mycin", "cillin", "zole", "mab"),
    "Diagnosis": ("itis", "osis", "emia"),
    "Anatomy": ("ius", "ix", "ula"),
}

_STEMS = {
    "source": {
        "Drug": ("kura", "dolo", "fira", "lenta", "mora", "pexa", "rofi", "sela"),
        "Diagnosis": ("gastr", "nephr", "derm", "card", "hepat", "neur"),
        "Anatomy": ("brach", "femor", "crani", "thorac", "ventr"),
    },
    "target": {
        "Drug": ("velo", "bruka", "nistra", "golfi", "herta", "zimra", "polda", "quena"),
        "Diagnosis": ("lumb", "ostr", "vell", "tars", "glott", "splen"),
        "Anatomy": ("dors", "cubit", "palat", "occip", "stern"),
    },
}

_MODIFIERS = {"source": ("forte", "retard"), "target": ("depot", "plus")}

_STRENGTH_RANGE = {"source": (50, 500), "target": (500, 950)}
_STRENGTH_UNITS = ("mg", "ml")

_FILLERS = {
    "source": (
        "the", "patient", "was", "given", "for", "daily", "with", "after",
        "and", "took", "dose", "of", "noted", "on", "exam", "stable",
        "review", "plan", "continue", "today",
    ),
    "target": (
        "der", "pazient", "wurde", "bekam", "wegen", "taglich", "mit", "nach",
        "und", "nahm", "gabe", "von", "befund", "am", "verlauf", "stabil",
        "kontrolle", "weiter", "heute", "gut",
    ),
}

# Abstract sentence patterns shared by both languages; "O" draws a filler
# word, any other item names an entity slot. Chatter patterns dominate so
# that uninformative sentences are plentiful in the pool.
_TEMPLATES = (
    ("O", "O", "O", "O", "O"),
    ("O", "O", "O", "O", "O", "O", "O"),
    ("O", "O", "O", "O"),
    ("O", "Drug", "Strength", "O", "O"),
    ("O", "O", "Diagnosis", "O", "O"),
    ("Drug", "Strength", "O", "Diagnosis"),
    ("O", "Anatomy", "O", "Diagnosis", "O"),
    ("O", "O", "Drug", "O", "Anatomy", "O"),
    ("Drug", "O", "Drug", "Strength", "O"),
)
_TEMPLATE_WEIGHTS = (0.20, 0.20, 0.15, 0.09, 0.09, 0.07, 0.07, 0.07, 0.06)


def default_lexicons(language: str) -> dict[str, tuple[str, ...]]:
    """Per-entity-type surface forms for one language."""
    if language not in _STEMS:
        raise CorpusError(f"unknown language {language!r} (expected 'source' or 'target')")
    stems = _STEMS[language]
    lex: dict[str, tuple[str, ...]] = {}
    for etype in ("Drug", "Diagnosis", "Anatomy"):
        entries = [stem + suffix for stem in stems[etype] for suffix in _SUFFIXES[etype]]
        if etype == "Drug":
            entries += [entries[i] + " " + mod for i, mod in enumerate(_MODIFIERS[language])]
        lex[etype] = tuple(entries)
    low, high = _STRENGTH_RANGE[language]
    lex["Strength"] = tuple(
        f"{amount}{unit}" for amount in range(low, high, 20) for unit in _STRENGTH_UNITS
    )
    return lex


def default_fillers(language: str) -> tuple[str, ...]:
    if language not in _FILLERS:
        raise CorpusError(f"unknown language {language!r} (expected 'source' or 'target')")
    return _FILLERS[language]


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic corpus. Everything defaults to a usable
    two-language transfer pair; only sizes usually need touching."""

    language: str = "source"
    entity_types: tuple[str, ...] = SYNTH_ENTITY_TYPES
    n_seed: int = 20
    n_pool: int = 1000
    n_validation: int = 100
    n_test: int = 200
    entity_density: float = 1.0
    lexicons: dict[str, tuple[str, ...]] | None = None
    fillers: tuple[str, ...] | None = None
    templates: tuple[tuple[str, ...], ...] = _TEMPLATES
    template_weights: tuple[float, ...] = _TEMPLATE_WEIGHTS
    splitter: SubwordSplitter = field(default=DEFAULT_SPLITTER)

    def scheme(self) -> LabelScheme:
        """Label scheme covering exactly this corpus's entity types."""
        return LabelScheme(entity_types=self.entity_types, mapping=())


def _resolve(config: GeneratorConfig) -> tuple[dict[str, tuple[str, ...]], tuple[str, ...]]:
    lexicons = dict(default_lexicons(config.language))
    if config.lexicons:
        lexicons.update(config.lexicons)
    fillers = config.fillers if config.fillers is not None else default_fillers(config.language)
    slot_types = {item for tpl in config.templates for item in tpl if item != "O"}
    for etype in sorted(slot_types):
        if etype not in config.entity_types:
            raise CorpusError(f"template slot {etype!r} not in configured entity types")
        if not lexicons.get(etype):
            raise CorpusError(f"empty lexicon for entity type {etype!r}")
    if not fillers:
        raise CorpusError("empty filler lexicon")
    return lexicons, fillers


def _sentence(
    config: GeneratorConfig,
    lexicons: dict[str, tuple[str, ...]],
    fillers: tuple[str, ...],
    rng: np.random.Generator,
    seq_id: str,
) -> TokenSequence:
    weights = np.asarray(config.template_weights, dtype=float)
    template = config.templates[int(rng.choice(len(config.templates), p=weights / weights.sum()))]
    words: list[tuple[str, str]] = []
    for item in template:
        if item != "O" and rng.random() < config.entity_density:
            entry = lexicons[item][int(rng.choice(len(lexicons[item])))]
            for k, piece in enumerate(entry.split(" ")):
                words.append((piece, f"B-{item}" if k == 0 else f"I-{item}"))
        else:
            words.append((fillers[int(rng.choice(len(fillers)))], "O"))
    return apply_subtoken_rule(words, config.splitter, seq_id)


def generate_synthetic_corpus(config: GeneratorConfig, rng_seed: int) -> CorpusSplit:
    """Generate a full split; byte-identical output for identical seeds."""
    lexicons, fillers = _resolve(config)
    rng = np.random.default_rng(rng_seed)
    parts: dict[str, tuple[TokenSequence, ...]] = {}
    sizes = (
        ("seed", config.n_seed),
        ("pool", config.n_pool),
        ("val", config.n_validation),
        ("test", config.n_test),
    )
    for name, count in sizes:
        parts[name] = tuple(
            _sentence(config, lexicons, fillers, rng, f"{config.language}-{name}-{i:06d}")
            for i in range(count)
        )
    return CorpusSplit(
        seed=parts["seed"],
        pool=parts["pool"],
        validation=parts["val"],
        test=parts["test"],
    )
