"""Corpus reading, label mapping, and subtoken alignment."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagloop import (
    DEFAULT_SPLITTER,
    EXCLUDED,
    CorpusError,
    CorpusSplit,
    GeneratorConfig,
    LabelScheme,
    SubwordSplitter,
    TokenSequence,
    apply_subtoken_rule,
    generate_synthetic_corpus,
    map_labels,
    read_corpus,
    write_corpus,
)

from conftest import word_sequence


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# read_corpus


def test_read_word_format_single_sentence(tmp_path):
    path = write(tmp_path, "notes.tsv", "he\tO\nhad\tO\nfever\tB-Diagnosis\n")
    whole_words = SubwordSplitter(pieces=("he", "had", "fever"))
    sequences = read_corpus(path, fmt="word", splitter=whole_words)
    assert len(sequences) == 1
    seq = sequences[0]
    assert len(seq) == 3
    assert seq.gold_tags == ("O", "O", "B-Diagnosis")
    assert seq.words == ("he", "had", "fever")
    assert seq.is_word_initial == (True, True, True)
    assert seq.id == "notes-000000"


def test_read_empty_file(tmp_path):
    assert read_corpus(write(tmp_path, "empty.tsv", "")) == []
    assert read_corpus(write(tmp_path, "blanks.tsv", "\n\n\n")) == []


def test_read_unknown_tag_names_line(tmp_path):
    path = write(tmp_path, "bad.tsv", "he\tO\nfell\tB-Bogus\n")
    with pytest.raises(CorpusError, match=r"bad\.tsv:2.*unknown tag.*B-Bogus"):
        read_corpus(path, fmt="word", scheme=LabelScheme())


def test_read_malformed_columns(tmp_path):
    path = write(tmp_path, "cols.tsv", "he\tO\textra\tcol\n")
    with pytest.raises(CorpusError, match=r"cols\.tsv:1"):
        read_corpus(path, fmt="word")
    with pytest.raises(CorpusError, match="unknown corpus format"):
        read_corpus(path, fmt="char")


def test_read_subtoken_format(tmp_path):
    text = "di\t0\tB-Alpha\n##ar\t0\tX\nhurt\t1\tO\n\nok\t0\tO\n"
    path = write(tmp_path, "sub.tsv", text)
    sequences = read_corpus(path)
    assert [s.id for s in sequences] == ["sub-000000", "sub-000001"]
    first = sequences[0]
    assert first.subtokens == ("di", "##ar", "hurt")
    assert first.gold_tags == ("B-Alpha", "X", "O")
    assert first.words == ("diar", "hurt")


def test_read_subtoken_rebases_word_index(tmp_path):
    path = write(tmp_path, "off.tsv", "a\t2\tO\n##b\t2\tX\nc\t3\tO\n")
    seq = read_corpus(path)[0]
    assert seq.word_index == (0, 0, 1)
    assert seq.is_word_initial == (True, False, True)


def test_read_unlabeled_and_mixed(tmp_path):
    path = write(tmp_path, "pool.tsv", "he\t_\nfell\t_\n")
    seq = read_corpus(path, fmt="word")[0]
    assert seq.gold_tags is None
    bad = write(tmp_path, "mix.tsv", "he\tO\nfell\t_\n")
    with pytest.raises(CorpusError, match="mixed"):
        read_corpus(bad, fmt="word")


def test_read_word_format_rejects_excluded_tag(tmp_path):
    path = write(tmp_path, "x.tsv", "he\tX\n")
    with pytest.raises(CorpusError, match="not a word-level tag"):
        read_corpus(path, fmt="word")


def test_read_id_prefix_override(tmp_path):
    path = write(tmp_path, "a.tsv", "he\tO\n")
    assert read_corpus(path, fmt="word", id_prefix="pool")[0].id == "pool-000000"


def test_write_then_read_round_trip(tmp_path):
    original = [
        apply_subtoken_rule(
            [("diagnosis", "B-Alpha"), ("confirmed", "O")], seq_id="round-000000"
        ),
        apply_subtoken_rule([("stable", None), ("today", None)], seq_id="round-000001"),
    ]
    path = tmp_path / "round.tsv"
    write_corpus(original, path)
    loaded = read_corpus(path)
    assert loaded == original
    # a second write of the loaded corpus is byte-identical
    again = tmp_path / "round2.tsv"
    write_corpus(loaded, again)
    assert again.read_text() == path.read_text()


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=10),
            st.sampled_from(["O", "B-Alpha", "I-Alpha"]),
        ),
        min_size=1,
        max_size=6,
    )
)
def test_round_trip_property(tmp_path_factory, words):
    seq = apply_subtoken_rule(words, seq_id="prop-000000")
    path = tmp_path_factory.mktemp("rt") / "prop.tsv"
    write_corpus([seq], path)
    assert read_corpus(path) == [seq]


# ---------------------------------------------------------------------------
# label mapping


def test_map_tag_conversions():
    scheme = LabelScheme()
    assert scheme.map_tag("B-Procedure") == "B-Treatment"
    assert scheme.map_tag("I-Disorder") == "I-Diagnosis"
    assert scheme.map_tag("B-Drug") == "B-Drug"
    assert scheme.map_tag("O") == "O"
    assert scheme.map_tag(EXCLUDED) == EXCLUDED


def test_map_tag_idempotent():
    scheme = LabelScheme()
    for tag in ("B-Procedure", "I-Disorder", "B-Drug", "O"):
        once = scheme.map_tag(tag)
        assert scheme.map_tag(once) == once


def test_map_tag_drop_and_errors():
    scheme = LabelScheme(entity_types=("Alpha",), mapping=(("Junk", "DROP"),))
    assert scheme.map_tag("B-Junk") == "O"
    assert scheme.map_tag("I-Junk") == "O"
    with pytest.raises(CorpusError, match="no mapping rule"):
        scheme.map_tag("B-Mystery")
    with pytest.raises(CorpusError, match="malformed"):
        scheme.map_tag("Z-Alpha")
    with pytest.raises(CorpusError, match="not in the entity set"):
        LabelScheme(entity_types=("Alpha",), mapping=(("Junk", "Missing"),))


def test_map_labels_sequence():
    scheme = LabelScheme()
    seq = apply_subtoken_rule([("resection", "B-Procedure"), ("done", "O")])
    mapped = map_labels(seq, scheme)
    assert mapped.word_tags == ("B-Treatment", "O")
    assert mapped.subtokens == seq.subtokens
    assert map_labels(seq.without_gold(), scheme).gold_tags is None


def test_scheme_tag_sets():
    scheme = LabelScheme(entity_types=("Alpha", "Beta"), mapping=())
    assert scheme.bio_tags == ("O", "B-Alpha", "I-Alpha", "B-Beta", "I-Beta", "X")
    assert scheme.decode_tags == scheme.bio_tags[:-1]
    assert scheme.is_valid_tag("I-Beta") and not scheme.is_valid_tag("B-Gamma")
    with pytest.raises(CorpusError, match="duplicate"):
        LabelScheme(entity_types=("Alpha", "Alpha"), mapping=())


# ---------------------------------------------------------------------------
# subtoken splitting


def test_split_known_medical_word():
    splitter = SubwordSplitter(pieces=("di", "ar", "hea"))
    seq = apply_subtoken_rule([("diarrhea", "B-Disorder")], splitter=splitter)
    assert seq.subtokens == ("di", "##ar", "##r", "##hea")
    assert seq.gold_tags == ("B-Disorder", EXCLUDED, EXCLUDED, EXCLUDED)
    assert seq.word_index == (0, 0, 0, 0)
    assert seq.words == ("diarrhea",)


def test_split_prefers_longest_piece():
    splitter = SubwordSplitter(pieces=("ab", "abc", "c"))
    assert splitter.split("abc") == ["abc"]
    assert splitter.split("abab") == ["ab", "##ab"]
    with pytest.raises(CorpusError):
        splitter.split("")


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=14))
def test_split_reassembles_exactly(word):
    pieces = DEFAULT_SPLITTER.split(word)
    assert pieces[0] + "".join(p.removeprefix("##") for p in pieces[1:]) == word


def test_apply_subtoken_rule_rejects_mixed():
    with pytest.raises(CorpusError, match="mixed"):
        apply_subtoken_rule([("he", "O"), ("fell", None)])
    with pytest.raises(CorpusError, match="empty"):
        apply_subtoken_rule([])


# ---------------------------------------------------------------------------
# TokenSequence and CorpusSplit validation


def test_sequence_alignment_validation():
    with pytest.raises(CorpusError, match="word_index must start at 0"):
        TokenSequence("b", ("a",), (1,), (True,))
    with pytest.raises(CorpusError, match="dense"):
        TokenSequence("b", ("a", "b"), (0, 2), (True, True))
    with pytest.raises(CorpusError, match="is_word_initial"):
        TokenSequence("b", ("a", "b"), (0, 1), (True, False))
    with pytest.raises(CorpusError, match="EXCLUDED tag on word-initial"):
        TokenSequence("b", ("a",), (0,), (True,), gold_tags=(EXCLUDED,))
    with pytest.raises(CorpusError, match="must carry X"):
        TokenSequence("b", ("a", "##b"), (0, 0), (True, False), gold_tags=("O", "O"))


def test_with_word_tags_round_trip():
    seq = apply_subtoken_rule([("diarrhea", None), ("today", None)])
    tagged = seq.with_word_tags(("B-Disorder", "O"))
    assert tagged.word_tags == ("B-Disorder", "O")
    assert all(
        tag == EXCLUDED
        for tag, initial in zip(tagged.gold_tags, tagged.is_word_initial)
        if not initial
    )
    with pytest.raises(CorpusError, match="expected 2 word tags"):
        seq.with_word_tags(("O",))


def test_split_partitions_disjoint():
    a = word_sequence(["x"], ["O"], seq_id="dup-000000")
    with pytest.raises(CorpusError, match="multiple partitions"):
        CorpusSplit(seed=(a,), pool=(a,), validation=(), test=())
    split = CorpusSplit(seed=(), pool=(a,), validation=(), test=())
    assert split.blind_pool[0].gold_tags is None
    assert split.pool_gold("dup-000000") is a
    with pytest.raises(KeyError):
        split.pool_gold("missing")


# ---------------------------------------------------------------------------
# synthetic generator


def test_generator_deterministic():
    config = GeneratorConfig(n_seed=3, n_pool=5, n_validation=2, n_test=2)
    first = generate_synthetic_corpus(config, rng_seed=7)
    second = generate_synthetic_corpus(config, rng_seed=7)
    assert first == second
    other = generate_synthetic_corpus(config, rng_seed=8)
    assert first != other


def test_generator_empty_pool():
    config = GeneratorConfig(n_seed=2, n_pool=0, n_validation=1, n_test=1)
    split = generate_synthetic_corpus(config, rng_seed=0)
    assert split.pool == ()
    assert len(split.seed) == 2


def test_generator_zero_density_is_all_outside():
    config = GeneratorConfig(n_seed=2, n_pool=4, n_validation=2, n_test=2, entity_density=0.0)
    split = generate_synthetic_corpus(config, rng_seed=3)
    for part in (split.seed, split.pool, split.validation, split.test):
        for seq in part:
            assert set(seq.word_tags) == {"O"}


def test_generator_languages_share_no_entity_surface():
    source = generate_synthetic_corpus(GeneratorConfig(n_seed=20, n_pool=0, n_validation=0, n_test=0), 1)
    target = generate_synthetic_corpus(
        GeneratorConfig(language="target", n_seed=20, n_pool=0, n_validation=0, n_test=0), 1
    )

    def entity_words(part):
        out = set()
        for seq in part:
            for word, tag in zip(seq.words, seq.word_tags):
                if tag != "O":
                    out.add(word)
        return out

    assert entity_words(source.seed) and entity_words(target.seed)
    assert not entity_words(source.seed) & entity_words(target.seed)


def test_generator_rejects_unknown_language():
    with pytest.raises(CorpusError, match="unknown language"):
        generate_synthetic_corpus(GeneratorConfig(language="klingon"), 0)
