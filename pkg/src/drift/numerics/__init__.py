"""Tensor autodiff engine: tape, layer ops, Adam, grad checking, checkpoints."""

from .backend import backend_name
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .optim import AdamState, adam_step
from .tensor import (
    Parameter,
    Tape,
    Tensor,
    add,
    batchnorm1d,
    center_loss,
    conv1d,
    dense,
    global_avg_pool,
    grl,
    max_pool1d,
    relu,
    separation_loss,
    slice_cols,
    softmax,
    softmax_cross_entropy,
    weighted_sum,
)

__all__ = [
    "AdamState", "GradCheckReport", "Parameter", "Tape", "Tensor", "add",
    "adam_step", "backend_name", "batchnorm1d", "center_loss", "conv1d",
    "dense", "global_avg_pool", "grad_check", "grl", "load_checkpoint",
    "max_pool1d", "relu", "save_checkpoint", "separation_loss", "slice_cols",
    "softmax", "softmax_cross_entropy", "weighted_sum",
]
