"""Word alignment with IBM Model 1 and dictionary extraction.

Both directions are trained independently, Viterbi-aligned, intersected into
one-to-one links, and the links are counted into a bidirectional dictionary.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .errors import EmptyCorpus, NoLinks

NULL = "<null>"


@dataclass
class LexicalTable:
    """``prob[(s, t)] = p(t | s)``; ``NULL`` appears as a source token.

    ``log_likelihood[i]`` is the corpus log-likelihood before EM iteration
    ``i``; the last entry is measured after the final iteration.
    """
    prob: dict
    direction: str = "fwd"
    log_likelihood: list = field(default_factory=list)

    def p(self, s, t) -> float:
        return self.prob.get((s, t), 0.0)


def _oriented(corpus, direction):
    if direction == "fwd":
        return [(p.source, p.target) for p in corpus]
    if direction == "rev":
        return [(p.target, p.source) for p in corpus]
    raise ValueError(f"direction must be 'fwd' or 'rev', got {direction!r}")


def _log_likelihood(bitext, prob):
    ll = 0.0
    for src, tgt in bitext:
        cands = (NULL,) + tuple(src)
        norm = math.log(len(cands))
        for t in tgt:
            ll += math.log(sum(prob[(s, t)] for s in cands)) - norm
    return ll


def train_ibm1(corpus, direction="fwd", iterations=5) -> LexicalTable:
    """EM training of p(t|s) with a NULL source word.

    Probabilities start uniform over the targets each source word co-occurs
    with, so the starting point is already a proper distribution.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("IBM Model 1 needs at least one sentence pair")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    bitext = _oriented(corpus, direction)

    cooc = defaultdict(set)
    for src, tgt in bitext:
        for s in (NULL,) + tuple(src):
            cooc[s].update(tgt)
    prob = {}
    for s, targets in cooc.items():
        u = 1.0 / len(targets)
        for t in targets:
            prob[(s, t)] = u

    lls = []
    for _ in range(iterations):
        lls.append(_log_likelihood(bitext, prob))
        counts = defaultdict(float)
        totals = defaultdict(float)
        for src, tgt in bitext:
            cands = (NULL,) + tuple(src)
            for t in tgt:
                z = sum(prob[(s, t)] for s in cands)
                for s in cands:
                    c = prob[(s, t)] / z
                    counts[(s, t)] += c
                    totals[s] += c
        prob = {k: counts[k] / totals[k[0]] for k in prob}
    lls.append(_log_likelihood(bitext, prob))
    return LexicalTable(prob, direction, lls)


def viterbi_align(src, tgt, table: LexicalTable) -> set:
    """Best source position for every target position; NULL links are dropped.

    Real positions win ties against NULL; among real positions the leftmost wins.
    Returns ``{(src_pos, tgt_pos)}``.
    """
    links = set()
    for j, t in enumerate(tgt):
        best, best_p = None, table.p(NULL, t)
        for i, s in enumerate(src):
            p = table.p(s, t)
            if p > best_p or (best is None and p == best_p and p > 0.0):
                best, best_p = i, p
        if best is not None:
            links.add((best, j))
    return links


def intersect(fwd: set, rev: set) -> set:
    """Both arguments in (source pos, target pos) orientation."""
    return fwd & rev


def align_corpus(corpus, iterations=5):
    """Symmetrized one-to-one links for every pair, plus both lexical tables."""
    fwd_table = train_ibm1(corpus, "fwd", iterations)
    rev_table = train_ibm1(corpus, "rev", iterations)
    links = []
    for pair in corpus:
        fwd = viterbi_align(pair.source, pair.target, fwd_table)
        rev = {(i, j) for (j, i) in viterbi_align(pair.target, pair.source, rev_table)}
        links.append(intersect(fwd, rev))
    return links, fwd_table, rev_table


@dataclass
class DictEntry:
    source: str
    target: str
    p_t_given_s: float
    p_s_given_t: float


class TranslationDictionary:
    """Word pairs with both conditionals; candidates sorted by p(t|s) descending."""

    def __init__(self, entries):
        self.by_source = defaultdict(list)
        for e in entries:
            self.by_source[e.source].append(e)
        for cands in self.by_source.values():
            cands.sort(key=lambda e: (-e.p_t_given_s, e.target))
        self.by_source = dict(self.by_source)

    def __len__(self):
        return sum(len(c) for c in self.by_source.values())

    def __contains__(self, source):
        return source in self.by_source

    def entries(self):
        for s in sorted(self.by_source):
            yield from self.by_source[s]

    def candidates(self, source) -> list:
        return self.by_source.get(source, [])

    def best(self, source):
        cands = self.by_source.get(source)
        return cands[0].target if cands else None

    def save(self, path, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(header + "\n")
            for e in self.entries():
                fh.write(f"{e.source}\t{e.target}\t{e.p_t_given_s!r}\t{e.p_s_given_t!r}\n")

    @classmethod
    def load(cls, path) -> "TranslationDictionary":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                s, t, pts, pst = line.split("\t")
                entries.append(DictEntry(s, t, float(pts), float(pst)))
        return cls(entries)


def extract_dictionary(corpus, links) -> TranslationDictionary:
    """Relative frequencies over intersected links in both directions."""
    pair_counts = Counter()
    for pair, sent_links in zip(corpus, links):
        for i, j in sent_links:
            pair_counts[(pair.source[i], pair.target[j])] += 1
    if not pair_counts:
        raise NoLinks("no sentence pair has a non-empty intersected alignment")
    src_tot, tgt_tot = Counter(), Counter()
    for (s, t), c in pair_counts.items():
        src_tot[s] += c
        tgt_tot[t] += c
    return TranslationDictionary(
        DictEntry(s, t, c / src_tot[s], c / tgt_tot[t]) for (s, t), c in pair_counts.items())


def filter_top_k(dictionary: TranslationDictionary, k=2) -> TranslationDictionary:
    """Keep the ``k`` best targets per source word; values are not renormalized."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = []
    for s in dictionary.by_source:
        kept.extend(dictionary.by_source[s][:k])
    return TranslationDictionary(kept)
