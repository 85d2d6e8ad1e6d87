"""Parallel corpus ingestion, tokenization and vocabularies."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, MnmtError

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3


def tokenize(line: str) -> list[str]:
    """Whitespace split with lowercasing; runs of blanks collapse."""
    return line.lower().split()


@dataclass(frozen=True)
class SentencePair:
    source: tuple
    target: tuple

    def __post_init__(self):
        if not self.source or not self.target:
            raise MnmtError("sentence pair with an empty side")
        for tok in self.source + self.target:
            if tok in RESERVED:
                raise MnmtError(f"reserved symbol {tok!r} inside a sentence")


@dataclass
class ParallelCorpus:
    pairs: list
    source_counts: Counter = field(init=False)
    target_counts: Counter = field(init=False)

    def __post_init__(self):
        self.source_counts = Counter(t for p in self.pairs for t in p.source)
        self.target_counts = Counter(t for p in self.pairs for t in p.target)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def from_lists(cls, pairs) -> "ParallelCorpus":
        """Build from ``(source, target)`` pairs of token lists or raw strings."""
        out = []
        for src, tgt in pairs:
            src = tokenize(src) if isinstance(src, str) else list(src)
            tgt = tokenize(tgt) if isinstance(tgt, str) else list(tgt)
            out.append(SentencePair(tuple(src), tuple(tgt)))
        return cls(out)

    def counts(self, side: str) -> Counter:
        return self.source_counts if side == "source" else self.target_counts

    def side(self, side: str) -> list:
        return [p.source if side == "source" else p.target for p in self.pairs]


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh.read().split("\n") if not line.startswith("#mnmt")]


def read_parallel(prefix, skip_empty=True) -> ParallelCorpus:
    """Read ``<prefix>.src`` / ``<prefix>.tgt``, aligned by line number."""
    src_lines = _read_lines(f"{prefix}.src")
    tgt_lines = _read_lines(f"{prefix}.tgt")
    # a trailing newline produces one empty final element on both sides
    if src_lines and src_lines[-1] == "":
        src_lines.pop()
    if tgt_lines and tgt_lines[-1] == "":
        tgt_lines.pop()
    if len(src_lines) != len(tgt_lines):
        raise MnmtError(f"{prefix}: {len(src_lines)} source vs {len(tgt_lines)} target lines")
    pairs = []
    for s, t in zip(src_lines, tgt_lines):
        s, t = tokenize(s), tokenize(t)
        if not s or not t:
            if skip_empty:
                continue
            raise MnmtError(f"{prefix}: empty sentence")
        pairs.append(SentencePair(tuple(s), tuple(t)))
    return ParallelCorpus(pairs)


def write_parallel(prefix, corpus: ParallelCorpus, header: str | None = None) -> None:
    for suffix, side in (("src", "source"), ("tgt", "target")):
        with open(f"{prefix}.{suffix}", "w", encoding="utf-8") as fh:
            if header:
                fh.write(header + "\n")
            for sent in corpus.side(side):
                fh.write(" ".join(sent) + "\n")


class Vocabulary:
    """Token/id bijection.  Ids 0..3 are PAD, UNK, BOS, EOS."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            raise MnmtError("vocabulary must start with the four reserved symbols")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise MnmtError("duplicate token in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id(self, token) -> int:
        return self.index.get(token, UNK_ID)

    def save(self, path, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(header + "\n")
            fh.write("\n".join(self.tokens) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[0].startswith("#mnmt"):
            lines = lines[1:]
        return cls([t for t in lines if t])


def build_vocab(corpus: ParallelCorpus, side: str, max_size: int) -> Vocabulary:
    """Keep the ``max_size - 4`` most frequent tokens; ties go to the earlier-seen token."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    if max_size < 5:
        raise ValueError("max_size must be at least 5")
    first_seen = {}
    for sent in corpus.side(side):
        for tok in sent:
            first_seen.setdefault(tok, len(first_seen))
    counts = corpus.counts(side)
    ranked = sorted(first_seen, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(list(RESERVED) + ranked[:max_size - 4])


def encode(tokens, vocab: Vocabulary) -> list[int]:
    return [vocab.id(t) for t in tokens]


def decode(ids, vocab: Vocabulary) -> list[str]:
    return [vocab.tokens[i] for i in ids]
