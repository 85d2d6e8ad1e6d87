"""Case-insensitive corpus BLEU, OOV recall and frequency-bin recall."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTestSet, LengthMismatch


def _fold(tokens):
    return [t.lower() for t in tokens]


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _as_ref_lists(references):
    # accept one reference per hypothesis or a list of references per hypothesis
    out = []
    for refs in references:
        if refs and isinstance(refs[0], str):
            refs = [refs]
        out.append([_fold(r) for r in refs])
    return out


@dataclass
class BleuReport:
    bleu: float
    precisions: list
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    matches: list = field(default_factory=list)
    totals: list = field(default_factory=list)

    def as_dict(self):
        d = {"bleu": self.bleu, "bp": self.brevity_penalty,
             "hyp_len": self.hyp_length, "ref_len": self.ref_length}
        d.update({f"p{n + 1}": p for n, p in enumerate(self.precisions)})
        return d


def bleu(hypotheses, references, max_n=4) -> BleuReport:
    """Corpus BLEU with clipped counts and the closest-reference brevity penalty.

    ``references[i]`` is either a token list or a list of token lists.
    """
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    refs_all = _as_ref_lists(references)
    matches, totals = [0] * max_n, [0] * max_n
    c_len = r_len = 0
    for hyp, refs in zip(hypotheses, refs_all):
        hyp = _fold(hyp)
        c_len += len(hyp)
        r_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            clip = Counter()
            for r in refs:
                clip |= _ngrams(r, n)
            matches[n - 1] += sum(min(c, clip[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    if c_len == 0:
        bp = 0.0
    else:
        bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / c_len)
    if min(precisions) == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(score, precisions, bp, c_len, r_len, matches, totals)


def sentence_bleu(hypothesis, references, max_n=4) -> float:
    """Add-one smoothed sentence BLEU; a diagnostic, not the corpus metric."""
    rep = bleu([hypothesis], [references], max_n)
    logs = [math.log((m + 1) / (t + 1)) for m, t in zip(rep.matches, rep.totals)]
    return rep.brevity_penalty * math.exp(sum(logs) / max_n)


@dataclass
class RecallReport:
    recall: dict
    hits: dict
    totals: dict


def oov_recall(outputs, oov_annotations) -> RecallReport:
    """Per-subset recall of gold OOV translations.

    ``oov_annotations[i]`` lists ``(gold translation, subset)`` for the OOV
    words of sentence i, subset being ``"T-INV"`` or ``"T-OOV"``.  An OOV is
    recalled when its gold translation occurs in that sentence's output.
    """
    if len(outputs) != len(oov_annotations):
        raise LengthMismatch(f"{len(outputs)} outputs vs {len(oov_annotations)} annotations")
    hits, totals = Counter(), Counter()
    for out, notes in zip(outputs, oov_annotations):
        produced = set(_fold(out))
        for gold, subset in notes:
            totals[subset] += 1
            hits[subset] += gold.lower() in produced
    if not totals:
        raise EmptyTestSet("no annotated OOV words")
    recall = {s: hits[s] / totals[s] for s in totals}
    return RecallReport(recall, dict(hits), dict(totals))


@dataclass
class FrequencyBins:
    boundaries: list
    bin_of: list
    counts: list
    hits: list
    ref_words: list

    @property
    def recall(self):
        return [h / r if r else float("nan") for h, r in zip(self.hits, self.ref_words)]


def min_frequencies(sources, train_counts):
    return [min(train_counts.get(w, 0) for w in src) for src in sources]


def quartile_boundaries(min_freqs):
    return [float(q) for q in np.quantile(np.asarray(min_freqs, dtype=np.float64), [0.25, 0.5, 0.75])]


def assign_bin(freq, boundaries):
    """Bin 0 holds freq <= b1, bin 1 holds b1 < freq <= b2, and so on."""
    return sum(freq > b for b in boundaries)


def word_hits(output, references):
    """Hits of output tokens in the references with reference-count clipping.

    Returns ``(hits, reference words)``; the denominator is the size of the
    max-count multiset union of the references.
    """
    refs = references if references and not isinstance(references[0], str) else [references]
    union = Counter()
    for r in refs:
        union |= Counter(_fold(r))
    out = Counter(_fold(output))
    return sum(min(c, union[w]) for w, c in out.items()), sum(union.values())


def frequency_analysis(outputs, references, sources, train_counts, boundaries=None) -> FrequencyBins:
    """Word recall per bin of sentences grouped by their rarest source word."""
    if not (len(outputs) == len(references) == len(sources)):
        raise LengthMismatch("outputs, references and sources differ in length")
    mins = min_frequencies(sources, train_counts)
    if boundaries is None:
        boundaries = quartile_boundaries(mins)
    if len(boundaries) != 3:
        raise ValueError("exactly three bin boundaries define four bins")
    bins = [assign_bin(f, boundaries) for f in mins]
    counts, hits, totals = [0] * 4, [0] * 4, [0] * 4
    for b, out, ref in zip(bins, outputs, references):
        h, t = word_hits(out, ref)
        counts[b] += 1
        hits[b] += h
        totals[b] += t
    return FrequencyBins(list(boundaries), bins, counts, hits, totals)
