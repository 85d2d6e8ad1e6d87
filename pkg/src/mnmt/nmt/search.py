"""Beam search over the (optionally hooked) decoder posterior."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import numcore as nc
from ..corpus import BOS_ID, EOS_ID, PAD_ID
from .model import EncoderStates, attend, decode_step, encode, initial_state


@dataclass
class Hypothesis:
    tokens: tuple
    logprob: float
    state: np.ndarray = field(repr=False, default=None)
    redirects: object = None

    @property
    def finished(self):
        return bool(self.tokens) and self.tokens[-1] == EOS_ID

    @property
    def score(self):
        return self.logprob / max(len(self.tokens), 1)

    def words(self):
        """Token ids without the closing EOS."""
        return self.tokens[:-1] if self.finished else self.tokens


def default_max_len(src_len):
    return 2 * src_len + 5


def _tile(enc: EncoderStates, n):
    if n == 1:
        return enc
    rep = lambda t: nc.Tensor(np.repeat(t.data, n, axis=0))
    return EncoderStates(rep(enc.h), np.repeat(enc.mask, n, axis=0), rep(enc.keys), rep(enc.rev_first))


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def beam_search(src_ids, params, beam=5, max_len=None, posterior_hook=None):
    """Return finished hypotheses, best first.

    ``posterior_hook(enc)`` is called once per sentence with the encoder
    states and returns ``step(probs, s_prev, y_prev, alpha) -> probs``
    operating on arrays of shape (n, V), (n, H), (n,), (n, J).  ``None``
    decodes with the bare model posterior.

    Ranking: total log-probability divided by length (EOS counted); ties go
    to the lower token-id sequence.
    """
    src_ids = np.asarray(src_ids, dtype=np.int64)
    max_len = default_max_len(len(src_ids)) if max_len is None else max_len
    enc = encode(src_ids, params)
    step_fn = posterior_hook(enc) if posterior_hook is not None else None
    live = [Hypothesis((), 0.0, initial_state(enc, params).data[0])]
    finished = []
    tiled = {}
    for t in range(max_len):
        n = len(live)
        if n not in tiled:
            tiled[n] = _tile(enc, n)
        s_prev = nc.Tensor(np.stack([h.state for h in live]))
        y_prev = np.array([h.tokens[-1] if h.tokens else BOS_ID for h in live], dtype=np.int64)
        alpha, context = attend(s_prev, tiled[n], params)
        s_next, probs = decode_step(y_prev, s_prev, context, params)
        p = probs.data
        if step_fn is not None:
            p = step_fn(p, s_prev.data, y_prev, alpha.data)
        logp = _log(p)
        logp[:, PAD_ID] = -np.inf
        logp[:, BOS_ID] = -np.inf
        total = np.array([h.logprob for h in live])[:, None] + logp
        k = beam - len(finished)
        flat = total.ravel()
        order = np.argsort(-flat, kind="stable")[:k]
        V = total.shape[1]
        new_live = []
        for idx in order:
            if not np.isfinite(flat[idx]):
                break
            b, tok = divmod(int(idx), V)
            hyp = Hypothesis(live[b].tokens + (tok,), float(flat[idx]), s_next.data[b])
            (finished if tok == EOS_ID else new_live).append(hyp)
        live = new_live
        if not live or len(finished) >= beam:
            break
    finished.extend(live)
    finished.sort(key=lambda h: (-h.score, h.tokens))
    return finished


def greedy_decode(src_ids, params, max_len=None, posterior_hook=None):
    """Argmax decoding; returns token ids including EOS if produced."""
    src_ids = np.asarray(src_ids, dtype=np.int64)
    max_len = default_max_len(len(src_ids)) if max_len is None else max_len
    enc = encode(src_ids, params)
    step_fn = posterior_hook(enc) if posterior_hook is not None else None
    s = initial_state(enc, params)
    y, out = BOS_ID, []
    for _ in range(max_len):
        alpha, context = attend(s, enc, params)
        s_new, probs = decode_step(np.array([y]), s, context, params)
        p = probs.data
        if step_fn is not None:
            p = step_fn(p, s.data, np.array([y]), alpha.data)
        p = p[0].copy()
        p[PAD_ID] = p[BOS_ID] = -1.0
        y = int(np.argmax(p))
        out.append(y)
        s = s_new
        if y == EOS_ID:
            break
    return out
