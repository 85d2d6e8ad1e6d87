"""Baseline attention-based encoder-decoder."""
from .model import (
    DecoderStep,
    EncoderStates,
    ForcedTrace,
    ModelParams,
    NMTConfig,
    attend,
    batch_loss,
    decode_step,
    encode,
    gru_cell,
    initial_state,
    pad_batch,
    readout_logits,
    teacher_force,
)
from .search import Hypothesis, beam_search, default_max_len, greedy_decode
from .train import TrainConfig, TrainReport, corpus_loss, train_nmt
