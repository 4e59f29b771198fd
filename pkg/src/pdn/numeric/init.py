from __future__ import annotations

import numpy as np

from .tensor import Tensor


def glorot_init(dims, rng: np.random.Generator, dtype=np.float64, name=None) -> Tensor:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)); vectors use fan_in = fan_out = len."""
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    if len(dims) == 1:
        fan_out = fan_in = dims[0]
    else:
        fan_out, fan_in = dims[0], int(np.prod(dims[1:]))
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-limit, limit, size=dims).astype(dtype)
    return Tensor(data, name=name, requires_grad=True)


def zeros_init(dims, dtype=np.float64, name=None) -> Tensor:
    dims = tuple(int(d) for d in dims)
    if any(d <= 0 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    return Tensor(np.zeros(dims, dtype=dtype), name=name, requires_grad=True)
