"""Deterministic reverse-mode autodiff core: tensors, layers, losses,
optimizers, gradient checking and model serialization."""

from .tensor import Parameter, Tensor, concat, no_grad, pad, stack
from .layers import (Conv1D, DecoderBlock, Dense, Dropout, Embedding,
                     EncoderBlock, FeedForward, LSTM, LayerNorm, Module,
                     MultiHeadAttention, PositionalEncoding, causal_mask,
                     key_padding_mask, scaled_dot_attention,
                     sinusoidal_encoding)
from .losses import masked_mse, weighted_cross_entropy
from .optim import Adam, NoamSchedule, noam_lr
from .gradcheck import GradCheckReport, check_gradients, standard_suite
from .serialize import (ModelFile, canonical_json, descriptor_hash,
                        load_model, restore_parameters, save_model)

__all__ = [
    "Adam", "Conv1D", "DecoderBlock", "Dense", "Dropout", "Embedding",
    "EncoderBlock", "FeedForward", "GradCheckReport", "LSTM", "LayerNorm",
    "ModelFile", "Module", "MultiHeadAttention", "NoamSchedule", "Parameter",
    "PositionalEncoding", "Tensor", "canonical_json", "causal_mask",
    "check_gradients", "concat", "descriptor_hash", "key_padding_mask",
    "load_model", "masked_mse", "no_grad", "noam_lr", "pad",
    "restore_parameters", "save_model", "scaled_dot_attention",
    "sinusoidal_encoding", "stack", "standard_suite",
    "weighted_cross_entropy",
]
