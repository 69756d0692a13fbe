"""Corpus ingestion, label mapping, and subtoken-level BIO alignment.

Sequences are stored at the subtoken level. Only the first subtoken of
each word carries a real BIO tag; the remaining subtokens carry the
EXCLUDED sentinel and are skipped by training and by every query
strategy. Word strings are recovered by stripping the ``##``
continuation marker.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

__all__ = [
    "EXCLUDED",
    "OUTSIDE",
    "DROP",
    "DEFAULT_ENTITY_TYPES",
    "DEFAULT_LABEL_MAPPING",
    "CorpusError",
    "LabelScheme",
    "TokenSequence",
    "CorpusSplit",
    "SubwordSplitter",
    "DEFAULT_SPLITTER",
    "apply_subtoken_rule",
    "map_labels",
    "read_corpus",
    "write_corpus",
]

EXCLUDED = "X"
OUTSIDE = "O"
DROP = "DROP"
UNLABELED_MARK = "_"
CONTINUATION = "##"

# Joint entity label set used when no scheme is given.
DEFAULT_ENTITY_TYPES = (
    "Drug",
    "Strength",
    "Duration",
    "Route",
    "Form",
    "Dosages",
    "Frequency",
    "Diseases",
    "Anatomy",
    "Treatment",
    "Diagnosis",
    "Chemical",
)

# Source-label conversions applied when folding foreign corpora into the
# joint set.
DEFAULT_LABEL_MAPPING = (
    ("Procedure", "Treatment"),
    ("Disorder", "Diagnosis"),
)


class CorpusError(ValueError):
    """Raised for malformed corpus files, tags, or label mappings."""


@dataclass(frozen=True)
class LabelScheme:
    """BIO tag set derived from an entity label set plus mapping rules.

    ``mapping`` rewrites corpus-native entity labels to joint labels; a
    rule targeting ``DROP`` erases the entity (tags become O).
    """

    entity_types: tuple[str, ...] = DEFAULT_ENTITY_TYPES
    mapping: tuple[tuple[str, str], ...] = DEFAULT_LABEL_MAPPING

    def __post_init__(self):
        if len(set(self.entity_types)) != len(self.entity_types):
            raise CorpusError("duplicate entity types in scheme")
        for source, target in self.mapping:
            if target != DROP and target not in self.entity_types:
                raise CorpusError(
                    f"mapping target {target!r} (from {source!r}) is not in the entity set"
                )

    @property
    def bio_tags(self) -> tuple[str, ...]:
        """Full tag set: O, B-/I- per entity type, and the EXCLUDED sentinel."""
        tags = [OUTSIDE]
        for etype in self.entity_types:
            tags.append(f"B-{etype}")
            tags.append(f"I-{etype}")
        tags.append(EXCLUDED)
        return tuple(tags)

    @property
    def decode_tags(self) -> tuple[str, ...]:
        """Tags the model may assign to word-initial positions (no EXCLUDED)."""
        return self.bio_tags[:-1]

    def is_valid_tag(self, tag: str) -> bool:
        return tag in self.bio_tags

    def map_tag(self, tag: str) -> str:
        """Rewrite one tag to the joint label set. Raises on unmapped labels."""
        if tag in (OUTSIDE, EXCLUDED):
            return tag
        prefix, _, label = tag.partition("-")
        if prefix not in ("B", "I") or not label:
            raise CorpusError(f"malformed BIO tag {tag!r}")
        if label in self.entity_types:
            return tag
        for source, target in self.mapping:
            if source == label:
                return OUTSIDE if target == DROP else f"{prefix}-{target}"
        raise CorpusError(f"no mapping rule for source label {label!r}")


@dataclass(frozen=True)
class TokenSequence:
    """One sentence as subtoken units aligned to source words."""

    id: str
    subtokens: tuple[str, ...]
    word_index: tuple[int, ...]
    is_word_initial: tuple[bool, ...]
    gold_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        n = len(self.subtokens)
        if n < 1:
            raise CorpusError(f"{self.id}: empty sequence")
        if len(self.word_index) != n or len(self.is_word_initial) != n:
            raise CorpusError(f"{self.id}: alignment length mismatch")
        if self.word_index[0] != 0:
            raise CorpusError(f"{self.id}: word_index must start at 0")
        for i in range(n):
            step = self.word_index[i] - (self.word_index[i - 1] if i else 0)
            if i and step not in (0, 1):
                raise CorpusError(f"{self.id}: word_index must be dense and non-decreasing")
            initial = i == 0 or step == 1
            if self.is_word_initial[i] != initial:
                raise CorpusError(f"{self.id}: is_word_initial inconsistent at position {i}")
        if self.gold_tags is not None:
            if len(self.gold_tags) != n:
                raise CorpusError(f"{self.id}: gold tag length mismatch")
            for i, tag in enumerate(self.gold_tags):
                if self.is_word_initial[i] and tag == EXCLUDED:
                    raise CorpusError(f"{self.id}: EXCLUDED tag on word-initial position {i}")
                if not self.is_word_initial[i] and tag != EXCLUDED:
                    raise CorpusError(
                        f"{self.id}: non-word-initial position {i} must carry {EXCLUDED}"
                    )

    def __len__(self) -> int:
        return len(self.subtokens)

    @property
    def n_words(self) -> int:
        return self.word_index[-1] + 1

    @property
    def word_initial_positions(self) -> tuple[int, ...]:
        return tuple(i for i, ini in enumerate(self.is_word_initial) if ini)

    @property
    def words(self) -> tuple[str, ...]:
        """Source words, reconstructed by stripping continuation markers."""
        words: list[str] = []
        for piece, initial in zip(self.subtokens, self.is_word_initial):
            if initial:
                words.append(piece)
            else:
                words[-1] += piece.removeprefix(CONTINUATION)
        return tuple(words)

    @property
    def word_tags(self) -> tuple[str, ...] | None:
        """Gold tags at word-initial positions, one per source word."""
        if self.gold_tags is None:
            return None
        return tuple(self.gold_tags[i] for i in self.word_initial_positions)

    def with_word_tags(self, word_tags: tuple[str, ...] | list[str]) -> "TokenSequence":
        """Return a copy carrying the given word-level tags as gold."""
        if len(word_tags) != self.n_words:
            raise CorpusError(f"{self.id}: expected {self.n_words} word tags, got {len(word_tags)}")
        tags = [EXCLUDED] * len(self)
        for word, pos in enumerate(self.word_initial_positions):
            tags[pos] = word_tags[word]
        return replace(self, gold_tags=tuple(tags))

    def without_gold(self) -> "TokenSequence":
        return replace(self, gold_tags=None)


@dataclass(frozen=True)
class CorpusSplit:
    """Train/pool/validation/test partitions, disjoint by instance id.

    Pool instances keep their gold tags so simulations can play oracle;
    callers that need a blind pool use ``blind_pool``.
    """

    seed: tuple[TokenSequence, ...]
    pool: tuple[TokenSequence, ...]
    validation: tuple[TokenSequence, ...]
    test: tuple[TokenSequence, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for part in (self.seed, self.pool, self.validation, self.test):
            for seq in part:
                if seq.id in seen:
                    raise CorpusError(f"instance id {seq.id!r} appears in multiple partitions")
                seen.add(seq.id)

    @property
    def blind_pool(self) -> tuple[TokenSequence, ...]:
        return tuple(seq.without_gold() for seq in self.pool)

    def pool_gold(self, instance_id: str) -> TokenSequence:
        """Oracle access to a pool instance's hidden gold tags."""
        for seq in self.pool:
            if seq.id == instance_id:
                return seq
        raise KeyError(instance_id)


# Character n-grams for the default splitter; longest match wins, single
# characters are always available as a fallback.
DEFAULT_SPLIT_PIECES = (
    "tion", "itis", "osis", "emia", "ment", "ing", "ous", "ate", "ine",
    "cin", "lin", "mab", "ol", "ex", "um", "us", "ix", "ra", "ti", "ar",
    "er", "en", "an", "on", "in", "is", "it", "th", "he", "re", "st",
    "ve", "ha", "ad", "ea", "ur", "or", "al", "mg", "ml",
)


@dataclass(frozen=True)
class SubwordSplitter:
    """Deterministic greedy splitter over a character n-gram vocabulary.

    Scans left to right taking the longest vocabulary piece at each
    offset (single characters always match). Continuation pieces are
    prefixed with ``##`` so words can be reassembled exactly.
    """

    pieces: tuple[str, ...] = DEFAULT_SPLIT_PIECES
    _by_length: tuple[int, ...] = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        lengths = sorted({len(p) for p in self.pieces if len(p) > 1}, reverse=True)
        object.__setattr__(self, "_by_length", tuple(lengths))

    def split(self, word: str) -> list[str]:
        if not word:
            raise CorpusError("cannot split an empty word")
        vocab = set(self.pieces)
        out: list[str] = []
        pos = 0
        while pos < len(word):
            piece = word[pos]
            for length in self._by_length:
                candidate = word[pos : pos + length]
                if len(candidate) == length and candidate in vocab:
                    piece = candidate
                    break
            out.append(piece if pos == 0 else CONTINUATION + piece)
            pos += len(piece)
        return out


DEFAULT_SPLITTER = SubwordSplitter()


def apply_subtoken_rule(
    words: list[tuple[str, str]] | list[tuple[str, None]],
    splitter: SubwordSplitter = DEFAULT_SPLITTER,
    seq_id: str = "seq-000000",
) -> TokenSequence:
    """Split word-level input into subtokens, tagging only first pieces.

    The first subtoken of each word inherits the word tag; every other
    subtoken gets the EXCLUDED sentinel. Pass ``None`` tags for an
    unlabeled sequence.
    """
    if not words:
        raise CorpusError(f"{seq_id}: empty sentence")
    labeled = words[0][1] is not None
    subtokens: list[str] = []
    word_index: list[int] = []
    initial: list[bool] = []
    tags: list[str] = []
    for w, (word, tag) in enumerate(words):
        if (tag is not None) != labeled:
            raise CorpusError(f"{seq_id}: mixed labeled and unlabeled words")
        pieces = splitter.split(word)
        if not pieces:
            raise CorpusError(f"{seq_id}: splitter produced no pieces for {word!r}")
        for k, piece in enumerate(pieces):
            subtokens.append(piece)
            word_index.append(w)
            initial.append(k == 0)
            if labeled:
                tags.append(tag if k == 0 else EXCLUDED)
    return TokenSequence(
        id=seq_id,
        subtokens=tuple(subtokens),
        word_index=tuple(word_index),
        is_word_initial=tuple(initial),
        gold_tags=tuple(tags) if labeled else None,
    )


def map_labels(seq: TokenSequence, scheme: LabelScheme) -> TokenSequence:
    """Rewrite a sequence's gold tags to the scheme's joint label set."""
    if seq.gold_tags is None:
        return seq
    return replace(seq, gold_tags=tuple(scheme.map_tag(t) for t in seq.gold_tags))


def _validate_tag(tag: str, scheme: LabelScheme | None, path: str, lineno: int) -> str:
    if scheme is not None and not scheme.is_valid_tag(tag):
        raise CorpusError(f"{path}:{lineno}: unknown tag {tag!r}")
    if scheme is None and tag not in (OUTSIDE, EXCLUDED):
        prefix, _, label = tag.partition("-")
        if prefix not in ("B", "I") or not label:
            raise CorpusError(f"{path}:{lineno}: unknown tag {tag!r}")
    return tag


def read_corpus(
    path,
    fmt: str = "subtoken",
    scheme: LabelScheme | None = None,
    splitter: SubwordSplitter = DEFAULT_SPLITTER,
    id_prefix: str | None = None,
) -> list[TokenSequence]:
    """Read a corpus file into TokenSequences.

    ``fmt="subtoken"``: tab-separated ``subtoken<TAB>word_index<TAB>tag``
    with blank lines between sequences; tag ``_`` marks an unlabeled
    sequence and ``X`` the excluded sentinel. ``fmt="word"``:
    two-column ``word<TAB>tag`` converted through ``apply_subtoken_rule``.
    """
    if fmt not in ("subtoken", "word"):
        raise CorpusError(f"unknown corpus format {fmt!r}")
    path = str(path)
    prefix = id_prefix if id_prefix is not None else path.rsplit("/", 1)[-1].split(".")[0]
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().split("\n")

    sequences: list[TokenSequence] = []
    rows: list[tuple[int, list[str]]] = []

    def flush():
        if not rows:
            return
        seq_id = f"{prefix}-{len(sequences):06d}"
        if fmt == "word":
            first_line, first_row = rows[0]
            labeled = first_row[1] != UNLABELED_MARK
            words = []
            for lineno, row in rows:
                if (row[1] != UNLABELED_MARK) != labeled:
                    raise CorpusError(f"{path}:{lineno}: mixed labeled and unlabeled lines")
                tag = None
                if labeled:
                    tag = _validate_tag(row[1], scheme, path, lineno)
                    if tag == EXCLUDED:
                        raise CorpusError(f"{path}:{lineno}: {EXCLUDED} is not a word-level tag")
                words.append((row[0], tag))
            sequences.append(apply_subtoken_rule(words, splitter, seq_id))
        else:
            subtokens, word_index, tags = [], [], []
            labeled = rows[0][1][2] != UNLABELED_MARK
            for lineno, row in rows:
                try:
                    widx = int(row[1])
                except ValueError:
                    raise CorpusError(f"{path}:{lineno}: word index {row[1]!r} is not an integer")
                if (row[2] != UNLABELED_MARK) != labeled:
                    raise CorpusError(f"{path}:{lineno}: mixed labeled and unlabeled lines")
                subtokens.append(row[0])
                word_index.append(widx)
                if labeled:
                    tags.append(_validate_tag(row[2], scheme, path, lineno))
            base = word_index[0]
            word_index = [w - base for w in word_index]
            initial = [i == 0 or word_index[i] != word_index[i - 1] for i in range(len(word_index))]
            try:
                sequences.append(
                    TokenSequence(
                        id=seq_id,
                        subtokens=tuple(subtokens),
                        word_index=tuple(word_index),
                        is_word_initial=tuple(initial),
                        gold_tags=tuple(tags) if labeled else None,
                    )
                )
            except CorpusError as err:
                raise CorpusError(f"{path}: sequence ending at line {rows[-1][0]}: {err}") from err
        rows.clear()

    expected_cols = 3 if fmt == "subtoken" else 2
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            flush()
            continue
        cols = line.rstrip("\r").split("\t")
        if len(cols) != expected_cols or any(not c for c in cols):
            raise CorpusError(
                f"{path}:{lineno}: expected {expected_cols} tab-separated columns, got {line!r}"
            )
        rows.append((lineno, cols))
    flush()
    return sequences


def write_corpus(sequences: list[TokenSequence], path) -> None:
    """Write sequences in the subtoken format read by ``read_corpus``."""
    blocks = []
    for seq in sequences:
        lines = []
        for i in range(len(seq)):
            tag = seq.gold_tags[i] if seq.gold_tags is not None else UNLABELED_MARK
            lines.append(f"{seq.subtokens[i]}\t{seq.word_index[i]}\t{tag}")
        blocks.append("\n".join(lines))
    with open(str(path), "w", encoding="utf-8") as handle:
        handle.write("\n\n".join(blocks))
        if blocks:
            handle.write("\n")
