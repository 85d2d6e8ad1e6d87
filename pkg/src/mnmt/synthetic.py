"""Synthetic parallel corpora with known gold translations.

* ``make_cipher``: word-for-word substitution, Zipfian word frequencies.
* ``make_copy``: target equals source over a small symbol set.
* ``make_lowres``: a small SOV -> SVO language pair with postposed target
  adjectives, a few context-dependent verb translations, and a designated
  tail of rare words that the training data barely covers.
* ``make_oov_suite``: test sentences containing novel source words, with a
  hand-style OOV table (translation plus similar-word candidates).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import ParallelCorpus, SentencePair

_SRC_SYLL = [c + v for c in "ktnmslrp" for v in "aiuo"]
_TGT_SYLL = [c + v for c in "bdgfvzhw" for v in "eay"]


def _coin(rng, syllables, taken, lo=2, hi=3):
    while True:
        n = int(rng.integers(lo, hi + 1))
        word = "".join(syllables[int(i)] for i in rng.integers(0, len(syllables), size=n))
        if word not in taken:
            taken.add(word)
            return word


def _zipf(n, s=1.0):
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _pairs_to_corpus(pairs):
    return ParallelCorpus([SentencePair(tuple(s), tuple(t)) for s, t in pairs])


# -- substitution cipher and copy ---------------------------------------------

@dataclass
class CipherTask:
    corpus: ParallelCorpus
    gold: dict


def make_cipher(n_pairs=500, n_words=100, min_len=3, max_len=10, seed=0) -> CipherTask:
    rng = np.random.default_rng(seed)
    taken_s, taken_t = set(), set()
    src_words = [_coin(rng, _SRC_SYLL, taken_s) for _ in range(n_words)]
    gold = {s: _coin(rng, _TGT_SYLL, taken_t) for s in src_words}
    probs = _zipf(n_words, 0.8)
    pairs = []
    for _ in range(n_pairs):
        n = int(rng.integers(min_len, max_len + 1))
        src = [src_words[int(i)] for i in rng.choice(n_words, size=n, p=probs)]
        pairs.append((src, [gold[w] for w in src]))
    return CipherTask(_pairs_to_corpus(pairs), gold)


def make_copy(n_pairs=1000, n_symbols=20, min_len=3, max_len=8, seed=0) -> ParallelCorpus:
    rng = np.random.default_rng(seed)
    symbols = [f"c{i}" for i in range(n_symbols)]
    pairs = []
    for _ in range(n_pairs):
        n = int(rng.integers(min_len, max_len + 1))
        seq = [symbols[int(i)] for i in rng.integers(0, n_symbols, size=n)]
        pairs.append((seq, list(seq)))
    return _pairs_to_corpus(pairs)


# -- low-resource language pair -----------------------------------------------

@dataclass
class SyntheticLanguage:
    """Lexicon by category.  ``lexicon[w]`` is (transitive form, intransitive form)."""
    categories: dict
    lexicon: dict
    weights: dict
    rare: set = field(default_factory=set)

    def translate_np(self, det, adj, noun):
        out = [self.lexicon[det][0], self.lexicon[noun][0]]
        if adj is not None:
            out.append(self.lexicon[adj][0])
        return out

    def render(self, clause):
        """Source and target token lists for an abstract clause."""
        subj, obj, verb = clause
        src = [subj[0]] + ([subj[1]] if subj[1] else []) + [subj[2]]
        tgt = self.translate_np(*subj)
        if obj is not None:
            src += [obj[0]] + ([obj[1]] if obj[1] else []) + [obj[2]]
            src.append(verb)
            tgt += [self.lexicon[verb][0]] + self.translate_np(*obj)
        else:
            src.append(verb)
            tgt.append(self.lexicon[verb][1])
        return src, tgt


def make_language(seed=0, n_det=6, n_adj=50, n_noun=150, n_verb=90,
                  ambiguous_verbs=0.2, rare_fraction=0.05) -> SyntheticLanguage:
    rng = np.random.default_rng(seed)
    taken_s, taken_t = set(), set()
    cats = {}
    for cat, n in (("det", n_det), ("adj", n_adj), ("noun", n_noun), ("verb", n_verb)):
        cats[cat] = [_coin(rng, _SRC_SYLL, taken_s, 1 if cat == "det" else 2,
                           1 if cat == "det" else 3) for _ in range(n)]
    lexicon = {}
    for cat, words in cats.items():
        for k, w in enumerate(words):
            t = _coin(rng, _TGT_SYLL, taken_t, 1 if cat == "det" else 2, 1 if cat == "det" else 3)
            alt = t
            if cat == "verb" and k % int(round(1 / ambiguous_verbs)) == 0:
                alt = _coin(rng, _TGT_SYLL, taken_t)
            lexicon[w] = (t, alt)
    weights = {cat: _zipf(len(words)) for cat, words in cats.items()}
    # rare tail: the lowest-ranked content words, unambiguous only
    n_rare = int(round(rare_fraction * sum(len(v) for v in cats.values())))
    rare = set()
    for cat, share in (("noun", 0.6), ("adj", 0.2), ("verb", 0.2)):
        unambiguous = [w for w in cats[cat][::-1] if lexicon[w][0] == lexicon[w][1]]
        rare.update(unambiguous[:int(round(share * n_rare))])
    return SyntheticLanguage(cats, lexicon, weights, rare)


def _sample(rng, lang, cat, exclude):
    words = lang.categories[cat]
    p = np.array([0.0 if w in exclude else q for w, q in zip(words, lang.weights[cat])])
    return words[int(rng.choice(len(words), p=p / p.sum()))]


def _clause(rng, lang, exclude, force=None):
    def np_(with_adj):
        det = _sample(rng, lang, "det", exclude)
        adj = _sample(rng, lang, "adj", exclude) if with_adj else None
        return [det, adj, _sample(rng, lang, "noun", exclude)]

    subj = np_(rng.random() < 0.5)
    obj = np_(rng.random() < 0.5) if rng.random() < 0.6 else None
    verb = _sample(rng, lang, "verb", exclude)
    if force is not None:
        cat, word = force
        if cat == "verb":
            verb = word
        else:
            slot = subj if obj is None or rng.random() < 0.5 else obj
            slot[1 if cat == "adj" else 2] = word
    return subj, obj, verb


def _category(lang, word):
    return next(c for c, ws in lang.categories.items() if word in ws)


@dataclass
class LowResourceTask:
    language: SyntheticLanguage
    train: ParallelCorpus
    dev: ParallelCorpus
    test: ParallelCorpus
    rare: set


def make_lowres(n_train=2000, n_dev=200, n_test=200, rare_test_fraction=0.4,
                rare_train_counts=(1, 2), seed=0, **language_kw) -> LowResourceTask:
    """Low-resource task whose rare-tail words occur 1-2 times in training."""
    lang = make_language(seed, **language_kw)
    rng = np.random.default_rng(seed + 1)
    rare = sorted(lang.rare)

    train = [lang.render(_clause(rng, lang, lang.rare)) for _ in range(n_train)]
    slots = rng.permutation(n_train)
    k = 0
    for i, word in enumerate(rare):
        for _ in range(rare_train_counts[i % len(rare_train_counts)]):
            train[slots[k]] = lang.render(_clause(rng, lang, lang.rare, (_category(lang, word), word)))
            k += 1

    def held_out(n):
        out = []
        for _ in range(n):
            if rng.random() < rare_test_fraction:
                word = rare[int(rng.integers(len(rare)))]
                out.append(lang.render(_clause(rng, lang, lang.rare, (_category(lang, word), word))))
            else:
                out.append(lang.render(_clause(rng, lang, lang.rare)))
        return out

    return LowResourceTask(lang, _pairs_to_corpus(train), _pairs_to_corpus(held_out(n_dev)),
                           _pairs_to_corpus(held_out(n_test)), set(rare))


# -- OOV suite ----------------------------------------------------------------

@dataclass
class OovSuite:
    sources: list
    references: list
    annotations: list
    entries: list


def make_oov_suite(task: LowResourceTask, n_sentences=60, n_similars=3, top=30, seed=0) -> OovSuite:
    """Sentences with one novel source noun each; half T-INV, half T-OOV.

    Source similars are frequent nouns; for T-OOV the target similars are
    their translations in the same order.
    """
    from .oov import OovEntry

    lang = task.language
    rng = np.random.default_rng(seed + 7)
    taken_s = {w for ws in lang.categories.values() for w in ws}
    taken_t = {t for pair in lang.lexicon.values() for t in pair}
    # stand-ins and T-INV translations must be covered by the training data
    seen_src, seen_tgt = task.train.source_counts, task.train.target_counts
    nouns = [w for w in lang.categories["noun"] if seen_src[w] and seen_tgt[lang.lexicon[w][0]]]
    frequent = nouns[:top]
    inv_pool = [w for w in nouns[top:] if w not in lang.rare] or frequent
    sources, refs, notes, entries = [], [], [], []
    for i in range(n_sentences):
        t_oov = i % 2 == 1
        oov = _coin(rng, _SRC_SYLL, taken_s, 3, 3)
        if t_oov:
            translation = _coin(rng, _TGT_SYLL, taken_t, 3, 3)
            avoid = set()
        else:
            proxy = inv_pool[int(rng.integers(len(inv_pool)))]
            translation = lang.lexicon[proxy][0]
            avoid = {proxy}
        sims = [frequent[int(j)] for j in rng.permutation(len(frequent))[:n_similars]]
        tsims = tuple(lang.lexicon[w][0] for w in sims) if t_oov else ()
        entries.append(OovEntry(oov, translation, tuple(sims), tsims))
        subj, obj, verb = _clause(rng, lang, lang.rare | avoid)
        src, tgt = lang.render((subj, obj, verb))
        # put the novel word in the subject noun slot
        noun_pos = 2 if subj[1] else 1
        old = subj[2]
        src[noun_pos] = oov
        tgt[tgt.index(lang.lexicon[old][0])] = translation
        sources.append(src)
        refs.append(tgt)
        notes.append([(translation, "T-OOV" if t_oov else "T-INV")])
    return OovSuite(sources, refs, notes, entries)
