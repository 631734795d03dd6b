"""Dense float64 arithmetic with a small reverse-mode autodiff engine."""

from eapred.numerics.gradcheck import GradCheckReport, gradient_check, relative_error
from eapred.numerics.rng import RngStream
from eapred.numerics.tensor import (
    Tensor,
    add,
    as_tensor,
    clamp_min,
    concat,
    dropout,
    exp,
    getitem,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    neg,
    pick,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    tanh,
    transpose,
)
from eapred.numerics.tensor import sum as tsum

__all__ = [
    "GradCheckReport",
    "RngStream",
    "Tensor",
    "add",
    "as_tensor",
    "clamp_min",
    "concat",
    "dropout",
    "exp",
    "getitem",
    "gradient_check",
    "layer_norm",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "pick",
    "relative_error",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "stack",
    "tanh",
    "transpose",
    "tsum",
]
