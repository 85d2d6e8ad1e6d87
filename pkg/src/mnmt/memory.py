"""Symbolic translation memory and its trainable attention.

A global memory of word pairs is narrowed per sentence to a local memory
whose source side is replaced by encoder annotations and merged per distinct
target word.  A separately trained attention over the local memory yields a
distribution over its target words that is interpolated with the model
posterior.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from . import numcore as nc
from .corpus import UNK_ID, encode as encode_ids
from .errors import EmptyMemory, InvalidBeta, MnmtError, NoTrainableSteps
from .nmt.model import ModelParams, teacher_force

log = logging.getLogger(__name__)


# -- memory construction ------------------------------------------------------

@dataclass(frozen=True)
class MemoryElement:
    source: str
    target: str
    p_t_given_s: float
    p_s_given_t: float


class GlobalMemory:
    """Static word-pair store indexed by source word."""

    def __init__(self, elements):
        by_source = {}
        for e in elements:
            by_source.setdefault(e.source, []).append(e)
        self._by_source = MappingProxyType({s: tuple(v) for s, v in by_source.items()})

    def __len__(self):
        return sum(len(v) for v in self._by_source.values())

    def __contains__(self, source):
        return source in self._by_source

    def lookup(self, source) -> tuple:
        return self._by_source.get(source, ())

    def elements(self):
        for s in sorted(self._by_source):
            yield from self._by_source[s]

    def save(self, path, header=None):
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(header + "\n")
            for e in self.elements():
                fh.write(f"{e.source}\t{e.target}\t{e.p_t_given_s!r}\t{e.p_s_given_t!r}\n")

    @classmethod
    def load(cls, path) -> "GlobalMemory":
        elements = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                s, t, pts, pst = line.split("\t")
                elements.append(MemoryElement(s, t, float(pts), float(pst)))
        return cls(elements)


def build_global_memory(dictionary, k=2) -> GlobalMemory:
    """One element per (source, target) among the ``k`` best targets of each source."""
    elements = []
    for source in sorted(dictionary.by_source):
        for entry in dictionary.candidates(source)[:k]:
            elements.append(MemoryElement(entry.source, entry.target,
                                          entry.p_t_given_s, entry.p_s_given_t))
    return GlobalMemory(elements)


@dataclass
class LocalMemory:
    """Merged per-sentence memory.

    ``members[k]`` lists the ``(source position, raw weight)`` occurrences
    merged into element k; ``vectors[k]`` is their renormalized weighted
    average of annotations.
    """
    targets: list
    target_ids: np.ndarray
    vectors: np.ndarray
    members: list
    index: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.targets)

    def merge_weights(self, k) -> np.ndarray:
        w = np.array([m[1] for m in self.members[k]], dtype=np.float64)
        return w / w.sum()


def _merge(groups, annotations, tgt_vocab, width):
    targets = list(groups)
    vectors = np.zeros((len(targets), width))
    members = []
    for k, t in enumerate(targets):
        occ = groups[t]
        w = np.array([p for _, p in occ], dtype=np.float64)
        w = w / w.sum()
        vectors[k] = w @ annotations[[j for j, _ in occ]]
        members.append(list(occ))
    ids = np.array([tgt_vocab.id(t) for t in targets], dtype=np.int64)
    return LocalMemory(targets, ids, vectors, members, {t: k for k, t in enumerate(targets)})


def build_local_memory(src_tokens, annotations, gmem: GlobalMemory, tgt_vocab,
                       skip_positions=()) -> LocalMemory:
    """Select, instantiate per occurrence, and merge per distinct target word.

    ``annotations`` is the (J, 2H) array of encoder states.  Elements whose
    target word is outside ``tgt_vocab`` are dropped; positions listed in
    ``skip_positions`` contribute nothing (used for substituted OOV words).
    """
    annotations = np.asarray(annotations)
    groups = {}
    for j, word in enumerate(src_tokens):
        if j in skip_positions:
            continue
        for e in gmem.lookup(word):
            if e.target not in tgt_vocab:
                continue
            groups.setdefault(e.target, []).append((j, e.p_s_given_t))
    return _merge(groups, annotations, tgt_vocab, annotations.shape[-1])


def extend_local_memory(local: LocalMemory, additions, annotations, tgt_vocab) -> LocalMemory:
    """New local memory with extra ``(target, position, weight)`` occurrences merged in."""
    groups = {t: list(m) for t, m in zip(local.targets, local.members)}
    for target, j, weight in additions:
        groups.setdefault(target, []).append((j, weight))
    annotations = np.asarray(annotations)
    return _merge(groups, annotations, tgt_vocab, annotations.shape[-1])


# -- memory attention ---------------------------------------------------------

VARIANTS = ("s_y", "s_xy", "sy_y", "sy_xy")


@dataclass(frozen=True)
class MemoryVariant:
    """Which factors attend (decoder state, previous word) and which are attended."""
    name: str

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise MnmtError(f"unknown memory variant {self.name!r}; choose from {VARIANTS}")

    @property
    def uses_prev_word(self):
        return self.name.startswith("sy_")

    @property
    def uses_source(self):
        return self.name.endswith("_xy")


class MemoryAttentionParams:
    """v (A,), W_s (H, A), W_u (dim_u, A) and, for ``sy_*`` variants, W_y (D, A)."""

    def __init__(self, variant: MemoryVariant, tensors: dict):
        self.variant = variant
        needed = {"v", "W_s", "W_u"} | ({"W_y"} if variant.uses_prev_word else set())
        if set(tensors) != needed:
            raise MnmtError(f"memory params for {variant.name} need {sorted(needed)}")
        self.tensors = tensors

    @classmethod
    def init(cls, variant: MemoryVariant, model_config, attn_dim=64, seed=1, scale=0.08):
        rng = np.random.default_rng(seed)
        D, H = model_config.emb_dim, model_config.hidden
        dim_u = D + 2 * H if variant.uses_source else D
        shapes = {"v": (attn_dim,), "W_s": (H, attn_dim), "W_u": (dim_u, attn_dim)}
        if variant.uses_prev_word:
            shapes["W_y"] = (D, attn_dim)
        return cls(variant, {n: nc.parameter(nc.uniform_init(rng, s, scale), name=f"mem.{n}")
                             for n, s in shapes.items()})

    def __getitem__(self, name):
        return self.tensors[name]

    def get(self, name):
        return self.tensors.get(name)

    def list(self):
        return list(self.tensors.values())

    def state_dict(self):
        return {n: t.data.copy() for n, t in self.tensors.items()}

    def checksum(self) -> str:
        import hashlib
        h = hashlib.sha256(self.variant.name.encode())
        for n in sorted(self.tensors):
            h.update(n.encode())
            h.update(np.ascontiguousarray(self.tensors[n].data).tobytes())
        return h.hexdigest()

    def save(self, path, header=None):
        tensors = {"mem.variant": np.array(float(VARIANTS.index(self.variant.name)))}
        tensors.update({f"mem.{n}": t.data for n, t in self.tensors.items()})
        nc.save_checkpoint(path, tensors, header)

    @classmethod
    def load(cls, path) -> "MemoryAttentionParams":
        raw = nc.load_checkpoint(path)
        variant = MemoryVariant(VARIANTS[int(raw.pop("mem.variant"))])
        return cls(variant, {n[4:]: nc.parameter(v, name=n) for n, v in raw.items()
                             if n.startswith("mem.")})


def memory_vectors(local: LocalMemory, tgt_emb, variant: MemoryVariant):
    """Attended-side vectors u_k, shape (K, dim_u): E[y_k] or [E[y_k]; h~_k]."""
    emb = np.asarray(tgt_emb)[local.target_ids]
    if variant.uses_source:
        return np.concatenate([emb, local.vectors], axis=-1)
    return emb


def memory_relevance(s_prev, y_prev_emb, u, theta: MemoryAttentionParams):
    """e_ik = v . tanh(s_{i-1} W_s + u_k W_u [+ E[y_{i-1}] W_y]); shape (n, K).

    ``s_prev`` is (n, H), ``y_prev_emb`` is (n, D) and ``u`` is (K, dim_u).
    """
    s_prev = nc.as_tensor(s_prev)
    n, K = s_prev.shape[0], nc.as_tensor(u).shape[0]
    query = s_prev @ theta["W_s"]
    if theta.variant.uses_prev_word:
        query = query + nc.as_tensor(y_prev_emb) @ theta["W_y"]
    keys = nc.as_tensor(u) @ theta["W_u"]
    pre = nc.reshape(query, (n, 1, -1)) + nc.reshape(keys, (1, K, -1))
    return nc.tanh(pre) @ theta["v"]


def memory_attention(scores):
    """Softmax over memory elements (the raw-ratio form is undefined for negative scores)."""
    scores = nc.as_tensor(scores)
    if scores.shape[-1] == 0:
        raise EmptyMemory("local memory has no elements")
    return nc.softmax(scores)


def combine_posteriors(probs, alpha_m, local: LocalMemory, beta):
    """p~(w) = beta * alpha_m[k(w)] + (1 - beta) * p(w); unchanged if memory is empty."""
    if not 0.0 <= beta <= 1.0:
        raise InvalidBeta(f"beta must lie in [0, 1], got {beta}")
    probs = np.asarray(probs)
    if len(local) == 0:
        return probs
    out = (1.0 - beta) * probs
    out[..., local.target_ids] += beta * np.asarray(alpha_m)
    return out


# -- posterior hooks for decoding ---------------------------------------------

class MemoryHook:
    """Posterior hook interpolating the memory attention into decoding."""

    def __init__(self, theta: MemoryAttentionParams, params: ModelParams, beta):
        if not 0.0 <= beta <= 1.0:
            raise InvalidBeta(f"beta must lie in [0, 1], got {beta}")
        self.theta = theta
        self.params = params
        self.beta = beta

    def step_fn(self, local: LocalMemory):
        if len(local) == 0:
            return None
        tgt_emb = self.params["tgt_emb"].data
        u = memory_vectors(local, tgt_emb, self.theta.variant)

        def step(probs, s_prev, y_prev, alpha):
            scores = memory_relevance(s_prev, tgt_emb[y_prev], u, self.theta)
            return combine_posteriors(probs, memory_attention(scores).data, local, self.beta)

        return step


def lexical_posterior(alpha, dictionary, src_tokens, tgt_vocab):
    """P(y) = sum_j alpha_j P(y | x_j), renormalized; uniform when nothing matches.

    ``alpha`` is (n, J) model attention; returns (n, V).
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    table = np.zeros((len(src_tokens), len(tgt_vocab)))
    for j, word in enumerate(src_tokens):
        for e in dictionary.candidates(word):
            if e.target in tgt_vocab:
                table[j, tgt_vocab.id(e.target)] += e.p_t_given_s
    out = alpha @ table
    mass = out.sum(axis=-1, keepdims=True)
    uniform = np.full_like(out, 1.0 / out.shape[-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mass > 0, out / np.where(mass > 0, mass, 1.0), uniform)


class LexicalHook:
    """Linear interpolation with the dictionary posterior under model attention."""

    def __init__(self, dictionary, tgt_vocab, beta):
        if not 0.0 <= beta <= 1.0:
            raise InvalidBeta(f"beta must lie in [0, 1], got {beta}")
        self.dictionary = dictionary
        self.tgt_vocab = tgt_vocab
        self.beta = beta

    def step_fn(self, src_tokens):
        def step(probs, s_prev, y_prev, alpha):
            lex = lexical_posterior(alpha, self.dictionary, src_tokens, self.tgt_vocab)
            return self.beta * lex + (1.0 - self.beta) * probs
        return step


# -- memory training ----------------------------------------------------------

@dataclass
class MemoryTrainConfig:
    epochs: int = 10
    batch: int = 16
    attn_dim: int = 64
    rho: float = 0.95
    eps: float = 1e-6
    clip: float = 5.0
    patience: int = 2
    seed: int = 1


@dataclass
class MemoryExample:
    """Frozen-model inputs for one sentence: the memory is fixed per sentence."""
    s_prev: np.ndarray
    y_prev_emb: np.ndarray
    u: np.ndarray
    gold: np.ndarray
    weights: np.ndarray

    @property
    def trainable_steps(self):
        return int(self.weights.sum())


def prepare_examples(pairs, params: ModelParams, gmem, src_vocab, tgt_vocab, variant):
    """Teacher-force the frozen model and attach local memories and gold indices.

    A step is skipped (weight 0) when its reference word is UNK, EOS, or not a
    target of the local memory.
    """
    tgt_emb = params["tgt_emb"].data
    out = []
    for src, tgt in pairs:
        src_ids = encode_ids(src, src_vocab)
        tgt_ids = encode_ids(tgt, tgt_vocab)
        trace = teacher_force(params, src_ids, tgt_ids)
        local = build_local_memory(src, trace.enc.h.data[0], gmem, tgt_vocab)
        if len(local) == 0:
            continue
        words = list(tgt) + [None]
        gold = np.zeros(len(words), dtype=np.int64)
        weights = np.zeros(len(words))
        for i, (word, wid) in enumerate(zip(words, trace.y_out)):
            if word is None or wid == UNK_ID or word not in local.index:
                continue
            gold[i] = local.index[word]
            weights[i] = 1.0
        out.append(MemoryExample(trace.s_prev, tgt_emb[trace.y_prev],
                                 memory_vectors(local, tgt_emb, variant), gold, weights))
    return out


def example_loss(ex: MemoryExample, theta):
    scores = memory_relevance(ex.s_prev, ex.y_prev_emb, ex.u, theta)
    return nc.softmax_cross_entropy(scores, ex.gold, weights=ex.weights)


def memory_cross_entropy(examples, theta) -> float:
    """Mean -log alpha_m at the gold element over trainable steps."""
    total = sum(float(example_loss(ex, theta).data) for ex in examples if ex.trainable_steps)
    steps = sum(ex.trainable_steps for ex in examples)
    if steps == 0:
        raise NoTrainableSteps("no step has its reference word in the local memory")
    return total / steps


def memory_epoch(examples, theta, state, config: MemoryTrainConfig, rng) -> int:
    """One pass of AdaDelta updates; returns the number of trainable steps seen."""
    live = [ex for ex in examples if ex.trainable_steps]
    plist = theta.list()
    seen = 0
    order = rng.permutation(len(live))
    for k in range(0, len(live), config.batch):
        batch = [live[i] for i in order[k:k + config.batch]]
        steps = sum(ex.trainable_steps for ex in batch)
        with nc.Tape() as tape:
            loss = example_loss(batch[0], theta)
            for ex in batch[1:]:
                loss = loss + example_loss(ex, theta)
            loss = loss * (1.0 / steps)
        grads, _ = nc.clip_by_global_norm(tape.gradient(loss, plist), config.clip)
        nc.adadelta_step(plist, grads, state)
        seen += steps
    return seen


@dataclass
class MemoryTrainReport:
    train_xent: list = field(default_factory=list)
    dev_xent: list = field(default_factory=list)
    best_epoch: int = -1


def train_memory_attention(pairs, params: ModelParams, gmem, src_vocab, tgt_vocab,
                           variant: MemoryVariant, config: MemoryTrainConfig,
                           dev_pairs=None, theta=None):
    """Fit the memory attention with the translation model frozen.

    Stops after ``config.epochs`` or when dev cross-entropy has not improved
    for ``config.patience`` epochs; the best dev epoch is returned.
    """
    examples = prepare_examples(pairs, params, gmem, src_vocab, tgt_vocab, variant)
    if sum(ex.trainable_steps for ex in examples) == 0:
        raise NoTrainableSteps("every reference word is UNK or absent from its local memory")
    dev = prepare_examples(dev_pairs, params, gmem, src_vocab, tgt_vocab, variant) if dev_pairs else None
    if theta is None:
        theta = MemoryAttentionParams.init(variant, params.config, config.attn_dim, config.seed)
    state = nc.AdaDeltaState.for_params(theta.list(), config.rho, config.eps)
    rng = np.random.default_rng(config.seed)
    report = MemoryTrainReport()
    best, best_state, stale = math.inf, None, 0
    for epoch in range(config.epochs):
        memory_epoch(examples, theta, state, config, rng)
        report.train_xent.append(memory_cross_entropy(examples, theta))
        if dev:
            report.dev_xent.append(memory_cross_entropy(dev, theta))
            log.info("memory epoch %d  train %.4f  dev %.4f", epoch,
                     report.train_xent[-1], report.dev_xent[-1])
            if report.dev_xent[-1] < best:
                best, best_state, stale = report.dev_xent[-1], theta.state_dict(), 0
                report.best_epoch = epoch
            else:
                stale += 1
                if stale >= config.patience:
                    break
        else:
            report.best_epoch = epoch
    if best_state is not None:
        for n, v in best_state.items():
            theta[n].data[...] = v
    return theta, report
