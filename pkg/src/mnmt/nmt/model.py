"""Attention-based encoder-decoder with GRU units and a maxout readout.

All functions work on a leading batch axis.  GRU equations (row-vector form,
``x W`` projections include the bias)::

    z  = sigmoid(x W_z + h U_z)
    r  = sigmoid(x W_r + h U_r)
    h~ = tanh(x W_h + (r * h) U_h)
    h' = (1 - z) * h + z * h~

Decoder at target step i::

    e_ij = v . tanh(s_{i-1} W_a + h_j U_a)      alpha_i = softmax(e_i)
    c_i  = sum_j alpha_ij h_j
    t_i  = s_{i-1} U_o + E[y_{i-1}] V_o + c_i C_o + b_o
    z_i  = maxout(t_i)                          p(y_i) = softmax(z_i W + b)
    s_i  = GRU([E[y_{i-1}]; c_i], s_{i-1})

and ``s_0 = tanh(h_1^rev W_init + b_init)``.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .. import numcore as nc
from ..corpus import BOS_ID, EOS_ID, PAD_ID
from ..errors import EmptyInput, MnmtError


@dataclass
class NMTConfig:
    src_vocab: int = 0
    tgt_vocab: int = 0
    emb_dim: int = 32
    hidden: int = 64
    attn_dim: int = 64
    readout: int = 64
    maxout_pool: int = 2
    init_scale: float = 0.08
    seed: int = 1

    def to_dict(self):
        return asdict(self)


def _shapes(cfg: NMTConfig):
    D, H, A, L, P = cfg.emb_dim, cfg.hidden, cfg.attn_dim, cfg.readout, cfg.maxout_pool
    shapes = {
        "src_emb": (cfg.src_vocab, D),
        "tgt_emb": (cfg.tgt_vocab, D),
    }
    for side in ("enc_f", "enc_b"):
        shapes.update({
            f"{side}_W": (D, 3 * H), f"{side}_b": (3 * H,),
            f"{side}_U": (H, 2 * H), f"{side}_Uh": (H, H),
        })
    shapes.update({
        "init_W": (H, H), "init_b": (H,),
        "att_Wa": (H, A), "att_Ua": (2 * H, A), "att_v": (A,),
        "dec_W": (D + 2 * H, 3 * H), "dec_b": (3 * H,),
        "dec_U": (H, 2 * H), "dec_Uh": (H, H),
        "out_U": (H, P * L), "out_V": (D, P * L), "out_C": (2 * H, P * L), "out_b": (P * L,),
        "out_W": (L, cfg.tgt_vocab), "out_bias": (cfg.tgt_vocab,),
    })
    return shapes


class ModelParams:
    """Every trainable tensor of the encoder-decoder, keyed by name."""

    def __init__(self, config: NMTConfig, tensors: dict):
        self.config = config
        expected = _shapes(config)
        if set(tensors) != set(expected):
            missing = set(expected) ^ set(tensors)
            raise MnmtError(f"parameter set mismatch: {sorted(missing)}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise MnmtError(f"{name}: shape {tensors[name].shape}, expected {shape}")
        self.tensors = {name: tensors[name] for name in expected}

    @classmethod
    def init(cls, config: NMTConfig, rng=None) -> "ModelParams":
        """U[-scale, scale] weights, zero biases."""
        rng = np.random.default_rng(config.seed) if rng is None else rng
        tensors = {}
        for name, shape in _shapes(config).items():
            if name.endswith("_b") or name == "out_bias":
                data = np.zeros(shape)
            else:
                data = nc.uniform_init(rng, shape, config.init_scale)
            tensors[name] = nc.parameter(data, name=name)
        return cls(config, tensors)

    @classmethod
    def zeros(cls, config: NMTConfig) -> "ModelParams":
        return cls(config, {n: nc.parameter(np.zeros(s), name=n) for n, s in _shapes(config).items()})

    def __getitem__(self, name):
        return self.tensors[name]

    def list(self):
        return list(self.tensors.values())

    def state_dict(self):
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def checksum(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for name, t in self.tensors.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def save(self, path, header=None):
        tensors = {f"cfg.{k}": np.array(float(v)) for k, v in self.config.to_dict().items()}
        tensors.update(self.state_dict())
        nc.save_checkpoint(path, tensors, header)

    @classmethod
    def load(cls, path) -> "ModelParams":
        raw = nc.load_checkpoint(path)
        fields = NMTConfig.__dataclass_fields__
        cfg = {}
        for k, f in fields.items():
            v = float(raw.pop(f"cfg.{k}"))
            cfg[k] = v if f.type == "float" else int(v)
        config = NMTConfig(**cfg)
        tensors = {n: nc.parameter(v, name=n) for n, v in raw.items() if not n.startswith("mem.")}
        return cls(config, tensors)


@dataclass
class EncoderStates:
    """Annotations ``h`` (B, J, 2H), padding mask (B, J), and cached ``h U_a``."""
    h: nc.Tensor
    mask: np.ndarray
    keys: nc.Tensor
    rev_first: nc.Tensor

    @property
    def length(self):
        return self.h.shape[1]


@dataclass
class DecoderStep:
    s: nc.Tensor
    context: nc.Tensor
    alpha: nc.Tensor


def gru_cell(x_proj, h, U, Uh):
    """One GRU update given the input projection ``x W + b`` (B, 3H)."""
    H = h.shape[-1]
    zr = nc.sigmoid(x_proj[:, :2 * H] + h @ U)
    z, r = zr[:, :H], zr[:, H:]
    cand = nc.tanh(x_proj[:, 2 * H:] + (r * h) @ Uh)
    return h + z * (cand - h)


def pad_batch(seqs, pad=PAD_ID):
    """Right-pad id sequences; returns (ids (B, T), mask (B, T))."""
    T = max(len(s) for s in seqs)
    ids = np.full((len(seqs), T), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = s
        mask[b, :len(s)] = 1.0
    return ids, mask


def _run_gru(xp, mask, U, Uh, reverse):
    B, T = mask.shape
    H = Uh.shape[0]
    h = nc.Tensor(np.zeros((B, H)))
    out = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        nxt = gru_cell(xp[:, t, :], h, U, Uh)
        m = mask[:, t:t + 1]
        h = nxt if m.all() else h + m * (nxt - h)
        out[t] = h
    return out


def encode(src_ids, params: ModelParams, mask=None) -> EncoderStates:
    """Bidirectional GRU annotations for a batch (B, J) or a single sequence."""
    src_ids = np.asarray(src_ids, dtype=np.int64)
    if src_ids.ndim == 1:
        src_ids = src_ids[None, :]
    if src_ids.shape[1] == 0:
        raise EmptyInput("cannot encode an empty source sentence")
    if mask is None:
        mask = np.ones(src_ids.shape)
    x = nc.embedding(params["src_emb"], src_ids)
    fwd = _run_gru(x @ params["enc_f_W"] + params["enc_f_b"], mask,
                   params["enc_f_U"], params["enc_f_Uh"], reverse=False)
    rev = _run_gru(x @ params["enc_b_W"] + params["enc_b_b"], mask,
                   params["enc_b_U"], params["enc_b_Uh"], reverse=True)
    h = nc.concat([nc.stack(fwd, axis=1), nc.stack(rev, axis=1)], axis=-1)
    return EncoderStates(h=h, mask=mask, keys=h @ params["att_Ua"], rev_first=rev[0])


def initial_state(enc: EncoderStates, params: ModelParams):
    return nc.tanh(enc.rev_first @ params["init_W"] + params["init_b"])


def attend(s_prev, enc: EncoderStates, params: ModelParams):
    """Returns (alpha (B, J), context (B, 2H))."""
    B, J = enc.mask.shape
    query = nc.reshape(s_prev @ params["att_Wa"], (B, 1, -1))
    scores = nc.tanh(enc.keys + query) @ params["att_v"]
    alpha = nc.softmax(scores, mask=enc.mask)
    context = nc.sum_(nc.reshape(alpha, (B, J, 1)) * enc.h, axis=1)
    return alpha, context


def readout_logits(y_emb, s_prev, context, params: ModelParams):
    t = (s_prev @ params["out_U"] + y_emb @ params["out_V"]
         + context @ params["out_C"] + params["out_b"])
    z = nc.maxout(t, params.config.maxout_pool)
    return z @ params["out_W"] + params["out_bias"]


def decode_step(y_prev, s_prev, context, params: ModelParams):
    """Returns (s_i, p(y_i) over the target vocabulary)."""
    y_emb = nc.embedding(params["tgt_emb"], np.asarray(y_prev, dtype=np.int64))
    probs = nc.softmax(readout_logits(y_emb, s_prev, context, params))
    x_proj = nc.concat([y_emb, context], axis=-1) @ params["dec_W"] + params["dec_b"]
    s = gru_cell(x_proj, s_prev, params["dec_U"], params["dec_Uh"])
    return s, probs


def teacher_inputs(tgt_seqs):
    """Decoder inputs [BOS, y_1..y_T] and outputs [y_1..y_T, EOS], padded."""
    y_in, _ = pad_batch([[BOS_ID] + list(t) for t in tgt_seqs])
    y_out, mask = pad_batch([list(t) + [EOS_ID] for t in tgt_seqs])
    return y_in, y_out, mask


def batch_loss(params: ModelParams, src_seqs, tgt_seqs):
    """Summed token cross-entropy with teacher forcing, and the token count."""
    src_ids, src_mask = pad_batch(src_seqs)
    enc = encode(src_ids, params, src_mask)
    y_in, y_out, y_mask = teacher_inputs(tgt_seqs)
    B, T = y_in.shape
    y_emb = nc.embedding(params["tgt_emb"], y_in)
    # input-side projections for every step at once
    emb_read = y_emb @ params["out_V"]
    emb_gru = y_emb @ params["dec_W"][:params.config.emb_dim]
    ctx_W = params["dec_W"][params.config.emb_dim:]

    s = initial_state(enc, params)
    pre_readout = []
    for i in range(T):
        _, context = attend(s, enc, params)
        pre_readout.append(s @ params["out_U"] + emb_read[:, i, :] + context @ params["out_C"])
        x_proj = emb_gru[:, i, :] + context @ ctx_W + params["dec_b"]
        nxt = gru_cell(x_proj, s, params["dec_U"], params["dec_Uh"])
        m = y_mask[:, i:i + 1]
        s = nxt if m.all() else s + m * (nxt - s)
    t = nc.stack(pre_readout, axis=1) + params["out_b"]
    z = nc.maxout(t, params.config.maxout_pool)
    logits = z @ params["out_W"] + params["out_bias"]
    loss = nc.softmax_cross_entropy(logits, y_out, weights=y_mask)
    return loss, float(y_mask.sum())


@dataclass
class ForcedTrace:
    """Teacher-forced decoder trace for one sentence pair (model frozen).

    Row i of each array belongs to the prediction of target position i
    (the final row predicts EOS).
    """
    enc: EncoderStates
    s_prev: np.ndarray
    y_prev: np.ndarray
    y_out: np.ndarray
    alpha: np.ndarray
    probs: np.ndarray


def teacher_force(params: ModelParams, src_ids, tgt_ids) -> ForcedTrace:
    enc = encode(src_ids, params)
    y_prev = np.array([BOS_ID] + list(tgt_ids), dtype=np.int64)
    y_out = np.array(list(tgt_ids) + [EOS_ID], dtype=np.int64)
    s = initial_state(enc, params)
    s_rows, alphas, probs = [], [], []
    for i in range(len(y_prev)):
        alpha, context = attend(s, enc, params)
        s_rows.append(s.data[0])
        alphas.append(alpha.data[0])
        s, p = decode_step(y_prev[i:i + 1], s, context, params)
        probs.append(p.data[0])
    return ForcedTrace(enc, np.array(s_rows), y_prev, y_out, np.array(alphas), np.array(probs))
