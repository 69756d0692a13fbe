"""Hand-crafted sparse features over source words.

The encoder plays the role of the token encoder in front of the CRF
layer: each word-initial position gets a bag of indicator features drawn
from configurable templates. The vocabulary is frozen after fitting;
feature strings never seen during fitting (including everything derived
from the occlusion placeholder) encode to nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ALL_TEMPLATES", "UNK_WORD", "FeatureEncoder", "word_shape"]

ALL_TEMPLATES = (
    "word",
    "lower",
    "prefix",
    "suffix",
    "shape",
    "word_initial",
    "neighbor1",
    "neighbor2",
)

# Placeholder used to occlude a word: contains NUL so none of its derived
# feature strings can collide with strings seen in real text.
UNK_WORD = "\x00unk\x00"

_BOS = "<s>"
_EOS = "</s>"


def word_shape(word: str) -> str:
    """Collapse a word to its character-class shape (Xx d punctuation)."""
    out = []
    for ch in word:
        if ch.isdigit():
            out.append("d")
        elif ch.isalpha():
            out.append("X" if ch.isupper() else "x")
        else:
            out.append(ch)
    return "".join(out)


@dataclass
class FeatureEncoder:
    """Maps each word in a sentence to a set of feature indices.

    Feature indices are dense and stable once ``freeze`` is called;
    ``dropout_rate`` is the per-feature drop probability used by
    stochastic forward passes (never during deterministic scoring).
    """

    templates: tuple[str, ...] = ALL_TEMPLATES
    dropout_rate: float = 0.0
    vocab: dict[str, int] = field(default_factory=dict)
    frozen: bool = False
    _cache: dict[tuple[str, ...], list[np.ndarray]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        unknown = set(self.templates) - set(ALL_TEMPLATES)
        if unknown:
            raise ValueError(f"unknown feature templates: {sorted(unknown)}")

    @property
    def n_features(self) -> int:
        return len(self.vocab)

    def feature_strings(self, words: tuple[str, ...] | list[str], i: int) -> list[str]:
        """All template expansions for word ``i`` of the sentence."""
        word = words[i]
        feats: list[str] = []
        for template in self.templates:
            if template == "word":
                feats.append(f"w={word}")
            elif template == "lower":
                feats.append(f"lw={word.lower()}")
            elif template == "prefix":
                feats.extend(f"p{k}={word[:k]}" for k in (1, 2, 3) if len(word) >= k)
            elif template == "suffix":
                feats.extend(f"s{k}={word[-k:]}" for k in (1, 2, 3) if len(word) >= k)
            elif template == "shape":
                feats.append(f"sh={word_shape(word)}")
            elif template == "word_initial":
                feats.append("wi")
            elif template == "neighbor1":
                feats.append(f"w[-1]={words[i - 1] if i >= 1 else _BOS}")
                feats.append(f"w[+1]={words[i + 1] if i + 1 < len(words) else _EOS}")
            elif template == "neighbor2":
                feats.append(f"w[-2]={words[i - 2] if i >= 2 else _BOS}")
                feats.append(f"w[+2]={words[i + 2] if i + 2 < len(words) else _EOS}")
        return feats

    def fit(self, sentences) -> "FeatureEncoder":
        """Register all feature strings of the given word sequences."""
        if self.frozen:
            raise RuntimeError("encoder is frozen")
        for words in sentences:
            for i in range(len(words)):
                for feat in self.feature_strings(words, i):
                    if feat not in self.vocab:
                        self.vocab[feat] = len(self.vocab)
        return self

    def freeze(self) -> "FeatureEncoder":
        self.frozen = True
        return self

    def encode(self, words: tuple[str, ...]) -> list[np.ndarray]:
        """Per-word arrays of active feature indices. Requires a frozen vocab."""
        if not self.frozen:
            raise RuntimeError("encode requires a frozen encoder; call freeze() first")
        words = tuple(words)
        cached = self._cache.get(words)
        if cached is not None:
            return cached
        encoded = [
            np.array(
                sorted(
                    self.vocab[f] for f in set(self.feature_strings(words, i)) if f in self.vocab
                ),
                dtype=np.intp,
            )
            for i in range(len(words))
        ]
        if len(self._cache) < 200000:
            self._cache[words] = encoded
        return encoded

    def to_dict(self) -> dict:
        ordered = sorted(self.vocab, key=self.vocab.get)
        return {
            "templates": list(self.templates),
            "dropout_rate": self.dropout_rate,
            "vocab": ordered,
            "frozen": self.frozen,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureEncoder":
        return cls(
            templates=tuple(payload["templates"]),
            dropout_rate=payload["dropout_rate"],
            vocab={feat: idx for idx, feat in enumerate(payload["vocab"])},
            frozen=payload["frozen"],
        )
