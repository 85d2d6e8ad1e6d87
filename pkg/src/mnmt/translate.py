"""Sentence translation with optional memory, lexical interpolation and OOV handling."""
from __future__ import annotations

from dataclasses import dataclass

from .corpus import decode, encode
from .memory import LexicalHook, MemoryHook, build_local_memory
from .nmt.search import beam_search
from .oov import RedirectionRecord, inject_oov_memory, redirect_output, substitute_source


@dataclass
class Translation:
    words: list
    hypothesis: object
    record: RedirectionRecord


class Translator:
    """Decoder front end.

    Without ``theta`` and ``gmem`` this is plain beam search over the model
    posterior.  ``beta == 0`` is not special-cased; the interpolation itself
    then leaves the posterior unchanged.  ``lexicon`` switches to the
    dictionary-interpolation comparator instead of the memory.
    """

    def __init__(self, params, src_vocab, tgt_vocab, gmem=None, theta=None, beta=0.3,
                 beam=5, oov_dict=None, lexicon=None):
        self.params = params
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.gmem = gmem
        self.beam = beam
        self.oov_dict = oov_dict
        self.memory_hook = MemoryHook(theta, params, beta) if theta is not None and gmem is not None else None
        self.lexical_hook = LexicalHook(lexicon, tgt_vocab, beta) if lexicon is not None else None

    def _hook(self, tokens, record):
        if self.lexical_hook is not None:
            step = self.lexical_hook.step_fn(tokens)
            return lambda enc: step
        if self.memory_hook is None:
            return None

        def hook(enc):
            h = enc.h.data[0]
            local = build_local_memory(tokens, h, self.gmem, self.tgt_vocab,
                                       skip_positions=record.substituted_positions)
            if self.oov_dict is not None and len(record):
                local = inject_oov_memory(local, record, self.oov_dict, h, self.tgt_vocab)
            return self.memory_hook.step_fn(local)

        return hook

    def translate(self, tokens) -> Translation:
        record = RedirectionRecord()
        if self.oov_dict is not None:
            tokens, record = substitute_source(tokens, self.oov_dict, self.src_vocab)
        hyps = beam_search(encode(tokens, self.src_vocab), self.params, self.beam,
                           posterior_hook=self._hook(tokens, record))
        best = hyps[0]
        best.redirects = record
        words = redirect_output(decode(best.words(), self.tgt_vocab), record)
        return Translation(words, best, record)

    def translate_all(self, sentences) -> list:
        return [self.translate(s).words for s in sentences]
