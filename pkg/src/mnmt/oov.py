"""Out-of-vocabulary handling through borrowed similar words.

A hand-written table gives, for each novel source word, its translation and
ordered lists of in-vocabulary stand-ins.  The source stand-in lends its
embedding to the OOV; the memory gets an element for the translation (or a
target stand-in), and predictions of a target stand-in are rewritten to the
real OOV translation after decoding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import MnmtError
from .memory import LocalMemory, extend_local_memory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OovEntry:
    oov_source: str
    translation: str
    source_similars: tuple
    target_similars: tuple = ()


class OovDictionary:
    def __init__(self, entries=()):
        self.entries = {}
        for e in entries:
            if not e.source_similars:
                raise MnmtError(f"OOV {e.oov_source!r} has no source similar words")
            self.entries[e.oov_source] = e

    def __contains__(self, word):
        return word in self.entries

    def __getitem__(self, word) -> OovEntry:
        return self.entries[word]

    def __len__(self):
        return len(self.entries)

    def validate(self, src_vocab, tgt_vocab) -> None:
        """Similar words must be in-vocabulary; target similars are required for OOV translations."""
        for e in self.entries.values():
            bad = [w for w in e.source_similars if w not in src_vocab]
            bad += [w for w in e.target_similars if w not in tgt_vocab]
            if bad:
                raise MnmtError(f"OOV {e.oov_source!r}: similar words not in vocabulary: {bad}")
            if e.translation not in tgt_vocab and not e.target_similars:
                raise MnmtError(f"OOV {e.oov_source!r}: translation is OOV but no target similars given")

    def save(self, path, header=None):
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(header + "\n")
            for e in self.entries.values():
                tgt = ",".join(e.target_similars) or "-"
                fh.write(f"{e.oov_source}\t{e.translation}\t{','.join(e.source_similars)}\t{tgt}\n")

    @classmethod
    def load(cls, path) -> "OovDictionary":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise MnmtError(f"{path}:{n}: expected 4 tab-separated fields")
                src, tgt, ssim, tsim = parts
                entries.append(OovEntry(src, tgt, tuple(w for w in ssim.split(",") if w),
                                        () if tsim == "-" else tuple(w for w in tsim.split(",") if w)))
        return cls(entries)


@dataclass(frozen=True)
class Redirect:
    borrowed: str
    oov: str
    side: str
    position: int = -1


@dataclass
class RedirectionRecord:
    entries: list = field(default_factory=list)

    def source(self):
        return [r for r in self.entries if r.side == "source"]

    def target(self):
        return [r for r in self.entries if r.side == "target"]

    @property
    def substituted_positions(self):
        return {r.position for r in self.source()}

    def __len__(self):
        return len(self.entries)


def substitute_source(tokens, oov_dict: OovDictionary, src_vocab=None):
    """Replace table OOVs by their first stand-in that is absent from the sentence.

    A word counts as OOV when it has a table entry and (if ``src_vocab`` is
    given) is outside the vocabulary.  Repeated OOVs share one stand-in.  If
    every candidate collides the word is left in place (it encodes as UNK).
    """
    out = list(tokens)
    record = RedirectionRecord()
    chosen = {}
    for j, word in enumerate(tokens):
        if word not in oov_dict or (src_vocab is not None and word in src_vocab):
            continue
        if word not in chosen:
            present = set(out)
            pick = next((c for c in oov_dict[word].source_similars if c not in present), None)
            if pick is None:
                log.warning("no usable source similar for OOV %r; leaving it as UNK", word)
                continue
            chosen[word] = pick
        out[j] = chosen[word]
        record.entries.append(Redirect(chosen[word], word, "source", j))
    return out, record


def inject_oov_memory(local: LocalMemory, record: RedirectionRecord, oov_dict: OovDictionary,
                      annotations, tgt_vocab) -> LocalMemory:
    """Add one memory element per substituted source position.

    In-vocabulary translations enter the memory directly.  OOV translations
    are represented by the first target similar that is not already a memory
    target; that word is recorded for redirection.
    """
    taken = set(local.targets)
    borrowed = {}
    additions = []
    for r in record.source():
        entry = oov_dict[r.oov]
        if entry.translation in tgt_vocab:
            additions.append((entry.translation, r.position, 1.0))
            taken.add(entry.translation)
            continue
        if entry.translation not in borrowed:
            pick = next((c for c in entry.target_similars if c not in taken), None)
            if pick is None:
                log.warning("no usable target similar for %r; skipping its memory element",
                            entry.translation)
                continue
            borrowed[entry.translation] = pick
            taken.add(pick)
            record.entries.append(Redirect(pick, entry.translation, "target"))
        additions.append((borrowed[entry.translation], r.position, 1.0))
    if not additions:
        return local
    return extend_local_memory(local, additions, annotations, tgt_vocab)


def redirect_output(words, record: RedirectionRecord) -> list:
    """Rewrite every output occurrence of a borrowed target word to its OOV form."""
    mapping = {r.borrowed: r.oov for r in record.target()}
    return [mapping.get(w, w) for w in words]
