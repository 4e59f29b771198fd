from . import ops
from .gradcheck import finite_difference_grad, relative_error
from .init import glorot_init, zeros_init
from .optim import AdamState, adam_step
from .tensor import Tape, TapeError, Tensor, backward

__all__ = [
    "AdamState", "Tape", "TapeError", "Tensor", "adam_step", "backward",
    "finite_difference_grad", "glorot_init", "ops", "relative_error", "zeros_init",
]
