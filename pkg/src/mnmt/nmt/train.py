"""Mini-batch training of the encoder-decoder with AdaDelta."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .. import numcore as nc
from ..errors import Divergence, NonFiniteGradient, NonFiniteValue
from .model import ModelParams, NMTConfig, batch_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch: int = 32
    epochs: int = 10
    clip: float = 5.0
    rho: float = 0.95
    eps: float = 1e-6
    seed: int = 1

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    dev_perplexity: list = field(default_factory=list)


def make_batches(n_items, lengths, batch, rng):
    """Shuffled batches of roughly similar length."""
    order = rng.permutation(n_items)
    pool = batch * 20
    batches = []
    for start in range(0, n_items, pool):
        chunk = sorted(order[start:start + pool], key=lambda i: lengths[i])
        batches.extend(chunk[k:k + batch] for k in range(0, len(chunk), batch))
    rng.shuffle(batches)
    return batches


def corpus_loss(params, src_seqs, tgt_seqs, batch=64):
    """Mean per-token cross-entropy (nats) without recording a tape."""
    total, tokens = 0.0, 0.0
    for k in range(0, len(src_seqs), batch):
        loss, n = batch_loss(params, src_seqs[k:k + batch], tgt_seqs[k:k + batch])
        total += float(loss.data)
        tokens += n
    return total / tokens


def train_nmt(src_seqs, tgt_seqs, model_config: NMTConfig, config: TrainConfig,
              dev=None, params=None, on_epoch=None):
    """Train on id sequences; returns (params, report).

    ``dev`` is an optional ``(src_seqs, tgt_seqs)`` pair used for per-epoch
    perplexity.  ``on_epoch(epoch, params, report)`` is called after each epoch.
    """
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = ModelParams.init(model_config, rng)
    plist = params.list()
    state = nc.AdaDeltaState.for_params(plist, config.rho, config.eps)
    lengths = [len(s) + len(t) for s, t in zip(src_seqs, tgt_seqs)]
    report = TrainReport()
    for epoch in range(config.epochs):
        total, tokens = 0.0, 0.0
        for idx in make_batches(len(src_seqs), lengths, config.batch, rng):
            try:
                with nc.Tape() as tape:
                    loss, n = batch_loss(params, [src_seqs[i] for i in idx],
                                         [tgt_seqs[i] for i in idx])
                    mean = loss * (1.0 / n)
                grads = tape.gradient(mean, plist)
            except (NonFiniteValue, NonFiniteGradient) as err:
                raise Divergence(f"epoch {epoch}: {err}") from None
            grads, _ = nc.clip_by_global_norm(grads, config.clip)
            nc.adadelta_step(plist, grads, state)
            total += float(loss.data)
            tokens += n
        report.train_loss.append(total / tokens)
        if not math.isfinite(report.train_loss[-1]):
            raise Divergence(f"epoch {epoch}: non-finite training loss")
        if dev is not None:
            report.dev_perplexity.append(math.exp(corpus_loss(params, *dev)))
            log.info("epoch %d  train %.4f  dev ppl %.3f", epoch, report.train_loss[-1],
                     report.dev_perplexity[-1])
        else:
            log.info("epoch %d  train %.4f", epoch, report.train_loss[-1])
        if on_epoch is not None:
            on_epoch(epoch, params, report)
    return params, report
