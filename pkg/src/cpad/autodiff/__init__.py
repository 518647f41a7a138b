from .tensor import Tensor, ShapeError, no_grad, grad_enabled
from . import ops
from .gradcheck import gradcheck, op_suite, format_table, GradCheckResult
from .optim import Adam, cosine_lr

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "grad_enabled",
    "ops",
    "gradcheck",
    "op_suite",
    "format_table",
    "GradCheckResult",
    "Adam",
    "cosine_lr",
]
