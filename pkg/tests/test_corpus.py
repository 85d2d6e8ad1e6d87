import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnmt.corpus import (
    UNK_ID,
    ParallelCorpus,
    SentencePair,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    read_parallel,
    tokenize,
    write_parallel,
)
from mnmt.errors import EmptyCorpus, MnmtError


def test_tokenize_examples():
    assert tokenize("Humans have 23 pairs") == ["humans", "have", "23", "pairs"]
    assert tokenize("") == []
    assert tokenize("a  b") == ["a", "b"]


def _corpus(*sources):
    return ParallelCorpus.from_lists([(s, "x") for s in sources])


def test_vocab_all_fit():
    v = build_vocab(_corpus("a a a b"), "source", 6)
    assert v.tokens == ["<pad>", "<unk>", "<s>", "</s>", "a", "b"]


def test_vocab_cutoff_maps_to_unk():
    v = build_vocab(_corpus("a a a b"), "source", 5)
    assert "b" not in v
    assert encode(["b"], v) == [UNK_ID]


def test_vocab_tie_goes_to_first_seen():
    v = build_vocab(_corpus("a b", "b a"), "source", 5)
    assert v.tokens[4] == "a"


def test_vocab_errors():
    with pytest.raises(EmptyCorpus):
        build_vocab(ParallelCorpus([]), "source", 10)
    with pytest.raises(ValueError):
        build_vocab(_corpus("a"), "source", 4)


def test_encode_decode():
    v = build_vocab(_corpus("a b c"), "source", 10)
    assert encode(["a"], v) == [v.id("a")]
    assert encode(["zzz"], v) == [1]
    assert decode(encode(["c", "a", "b"], v), v) == ["c", "a", "b"]


def test_sentence_pair_invariants():
    with pytest.raises(MnmtError):
        SentencePair((), ("x",))
    with pytest.raises(MnmtError):
        SentencePair(("a", "</s>"), ("x",))


def test_vocab_file_round_trip_skips_header(tmp_path):
    v = build_vocab(_corpus("a b b c"), "source", 10)
    path = tmp_path / "v.txt"
    v.save(path, header="#mnmt version=0 config=x seed=1")
    assert Vocabulary.load(path) == v


def test_parallel_round_trip(tmp_path):
    corpus = ParallelCorpus.from_lists([("a b", "x y"), ("c", "z")])
    write_parallel(tmp_path / "c", corpus, header="#mnmt h")
    back = read_parallel(tmp_path / "c")
    assert back.pairs == corpus.pairs


def test_parallel_line_mismatch(tmp_path):
    (tmp_path / "c.src").write_text("a\nb\n")
    (tmp_path / "c.tgt").write_text("x\n")
    with pytest.raises(MnmtError):
        read_parallel(tmp_path / "c")


words = st.lists(st.sampled_from(list("abcdefgh")), min_size=1, max_size=6)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(words, words), min_size=1, max_size=10), st.integers(5, 12))
def test_vocab_properties(pairs, size):
    corpus = ParallelCorpus.from_lists(pairs)
    v1 = build_vocab(corpus, "source", size)
    v2 = build_vocab(corpus, "source", size)
    assert v1.tokens == v2.tokens
    assert len(v1) <= size
    assert sum(corpus.source_counts.values()) == sum(len(s) for s, _ in pairs)
    for tok in v1.tokens[4:]:
        assert decode(encode([tok], v1), v1) == [tok]
