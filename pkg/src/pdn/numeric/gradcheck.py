"""Central finite differences, used as an independent gradient oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np


def finite_difference_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                           h: float = 1e-5) -> np.ndarray:
    """Estimate df/dx elementwise with ``(f(x+h e_i) - f(x-h e_i)) / 2h``.

    ``x`` is perturbed in place and restored after each element, so ``f``
    may close over the same array.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(x))
        flat[i] = orig - h
        down = float(f(x))
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Worst elementwise ``|a-b| / max(1, |a|, |b|)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float((np.abs(a - b) / denom).max())
