import itertools
import math
from collections import defaultdict

import pytest

from mnmt.aligner import (
    NULL,
    DictEntry,
    LexicalTable,
    TranslationDictionary,
    align_corpus,
    extract_dictionary,
    filter_top_k,
    intersect,
    train_ibm1,
    viterbi_align,
)
from mnmt.corpus import ParallelCorpus
from mnmt.errors import EmptyCorpus, NoLinks
from mnmt.synthetic import make_cipher


def brute_force_em(bitext, iterations):
    """IBM Model 1 EM by enumerating every complete alignment of each pair."""
    cooc = defaultdict(set)
    for src, tgt in bitext:
        for s in (NULL,) + src:
            cooc[s].update(tgt)
    t = {(s, w): 1.0 / len(ws) for s, ws in cooc.items() for w in ws}
    for _ in range(iterations):
        counts = defaultdict(float)
        for src, tgt in bitext:
            cands = (NULL,) + src
            weights = {}
            for a in itertools.product(range(len(cands)), repeat=len(tgt)):
                weights[a] = math.prod(t[(cands[i], w)] for i, w in zip(a, tgt))
            z = sum(weights.values())
            for a, p in weights.items():
                for i, w in zip(a, tgt):
                    counts[(cands[i], w)] += p / z
        totals = defaultdict(float)
        for (s, _), c in counts.items():
            totals[s] += c
        t = {k: counts[k] / totals[k[0]] for k in t}
    return t


def test_single_pair_converges_immediately():
    table = train_ibm1(ParallelCorpus.from_lists([("a", "x")]), iterations=1)
    assert table.p("a", "x") == pytest.approx(1.0)


@pytest.mark.parametrize("iterations", [1, 2, 3])
def test_two_pair_em_matches_enumeration_oracle(iterations):
    corpus = ParallelCorpus.from_lists([("a b", "x y"), ("a", "x")])
    table = train_ibm1(corpus, iterations=iterations)
    oracle = brute_force_em([(p.source, p.target) for p in corpus], iterations)
    assert set(table.prob) == set(oracle)
    for k, v in oracle.items():
        assert table.prob[k] == pytest.approx(v, abs=1e-6)


def test_two_pair_em_moves_towards_gold():
    corpus = ParallelCorpus.from_lists([("a b", "x y"), ("a", "x")])
    p = [train_ibm1(corpus, iterations=n) for n in (1, 3, 10)]
    assert p[0].p("a", "x") < p[1].p("a", "x") < p[2].p("a", "x")
    assert p[0].p("b", "y") < p[1].p("b", "y") < p[2].p("b", "y")


def test_tables_are_normalized():
    table = train_ibm1(make_cipher(n_pairs=50, n_words=20, seed=2).corpus, iterations=3)
    totals = defaultdict(float)
    for (s, _), p in table.prob.items():
        totals[s] += p
    for s, total in totals.items():
        assert abs(total - 1.0) < 1e-9, s


def test_em_log_likelihood_non_decreasing():
    for direction in ("fwd", "rev"):
        table = train_ibm1(make_cipher(n_pairs=100, seed=4).corpus, direction, iterations=8)
        ll = table.log_likelihood
        assert len(ll) == 9
        assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))


def test_train_errors():
    with pytest.raises(EmptyCorpus):
        train_ibm1(ParallelCorpus([]))
    with pytest.raises(ValueError):
        train_ibm1(ParallelCorpus.from_lists([("a", "x")]), iterations=0)



def test_viterbi_examples():
    table = LexicalTable({("a", "x"): 0.9, (NULL, "x"): 0.1})
    assert viterbi_align(("a",), ("x",), table) == {(0, 0)}
    table = LexicalTable({("a", "x"): 0.1, (NULL, "x"): 0.9})
    assert viterbi_align(("a",), ("x",), table) == set()
    table = LexicalTable({("a", "x"): 0.5, ("b", "x"): 0.5, (NULL, "x"): 0.2})
    assert viterbi_align(("a", "b"), ("x",), table) == {(0, 0)}


def test_intersect_examples():
    assert intersect({(0, 0), (1, 1)}, {(0, 0)}) == {(0, 0)}
    assert intersect({(0, 0)}, {(1, 1)}) == set()
    assert intersect({(0, 1), (1, 0)}, {(0, 1), (1, 0)}) == {(0, 1), (1, 0)}


def test_intersection_is_one_to_one():
    links, _, _ = align_corpus(make_cipher(n_pairs=100, seed=5).corpus)
    for sent in links:
        assert len({i for i, _ in sent}) == len(sent)
        assert len({j for _, j in sent}) == len(sent)


def test_extract_count_ratios():
    pairs = [("a", "x")] * 3 + [("a", "y")]
    corpus = ParallelCorpus.from_lists(pairs)
    d = extract_dictionary(corpus, [{(0, 0)}] * 4)
    probs = {e.target: e.p_t_given_s for e in d.candidates("a")}
    assert probs == {"x": 0.75, "y": 0.25}
    assert [e.target for e in d.candidates("a")] == ["x", "y"]


def test_extract_single_link():
    d = extract_dictionary(ParallelCorpus.from_lists([("a b", "x")]), [{(1, 0)}])
    (e,) = d.entries()
    assert (e.source, e.target, e.p_t_given_s, e.p_s_given_t) == ("b", "x", 1.0, 1.0)


def test_extract_no_links():
    with pytest.raises(NoLinks):
        extract_dictionary(ParallelCorpus.from_lists([("a", "x")]), [set()])


def test_cipher_dictionary_precision():
    task = make_cipher(n_pairs=300, seed=6)
    links, _, _ = align_corpus(task.corpus)
    d = filter_top_k(extract_dictionary(task.corpus, links), 2)
    sources = list(d.by_source)
    correct = sum(d.best(s) == task.gold[s] for s in sources)
    assert correct / len(sources) >= 0.95


def _dict(*rows):
    return TranslationDictionary(DictEntry(*r) for r in rows)


def test_filter_top_k():
    d = _dict(("a", "x", 0.5, 1.0), ("a", "y", 0.3, 1.0), ("a", "z", 0.2, 1.0))
    kept = filter_top_k(d, 2).candidates("a")
    assert [e.target for e in kept] == ["x", "y"]
    assert kept[1].p_t_given_s == 0.3
    one = _dict(("b", "x", 1.0, 1.0))
    assert filter_top_k(one, 2).candidates("b") == one.candidates("b")
    tie = _dict(("c", "q", 0.5, 1.0), ("c", "p", 0.5, 1.0))
    assert [e.target for e in filter_top_k(tie, 1).candidates("c")] == ["p"]
    with pytest.raises(ValueError):
        filter_top_k(d, 0)


def test_dictionary_file_round_trip(tmp_path):
    d = _dict(("b", "x", 1.0, 0.5), ("a", "y", 0.25, 1.0), ("a", "x", 0.75, 0.5))
    path = tmp_path / "d.tsv"
    d.save(path, header="#mnmt h")
    lines = path.read_text().splitlines()
    assert [l.split("\t")[:2] for l in lines[1:]] == [["a", "x"], ["a", "y"], ["b", "x"]]
    assert list(TranslationDictionary.load(path).entries()) == list(d.entries())
