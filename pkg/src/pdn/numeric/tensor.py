"""Tensors and the gradient tape.

A :class:`Tensor` wraps a numpy array. Operations in :mod:`pdn.numeric.ops`
append a backward closure to the innermost active :class:`Tape`; replaying
the tape in reverse accumulates gradients into ``Tensor.grad``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "name", "requires_grad")

    def __init__(self, data, name: str | None = None, requires_grad: bool = False,
                 dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.name = name
        self.requires_grad = requires_grad

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(dims={self.dims}, dtype={self.data.dtype})"


class TapeError(RuntimeError):
    pass


_active: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _active[-1] if _active else None


class Tape:
    """Ordered record of primitive operations.

    Use as a context manager around a forward pass, then call
    :meth:`backward` once with the scalar loss.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable[[np.ndarray], None]]] = []
        self._consumed = False
        # Every tensor that received a gradient; cleared on backward start.
        self._touched: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _active.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active.remove(self)

    def __len__(self) -> int:
        return len(self._records)

    def record(self, output: Tensor, inputs: Iterable[Tensor],
               backward_fn: Callable[[np.ndarray], None]) -> None:
        if self._consumed:
            raise TapeError("cannot record onto a consumed tape")
        self._records.append((output, tuple(inputs), backward_fn))

    def backward(self, loss: Tensor, params: Mapping[str, Tensor] | None = None,
                 trace: list | None = None) -> dict[str, np.ndarray]:
        """Propagate d(loss)/d(.) through the recorded ops.

        Returns a gradient per entry of ``params`` (zeros for parameters the
        forward pass never touched). ``trace``, when given, receives the
        index of each record in the order it was replayed.
        """
        if self._consumed:
            raise TapeError("tape already consumed by a previous backward()")
        if loss.data.size != 1:
            raise TapeError(f"loss must be a scalar, got dims {loss.dims}")
        self._consumed = True

        seen = set()
        for out, inputs, _ in self._records:
            for t in (out, *inputs):
                if id(t) not in seen:
                    seen.add(id(t))
                    t.grad = None
        if params is not None:
            for p in params.values():
                p.grad = None

        loss.grad = np.ones_like(loss.data)
        for idx in range(len(self._records) - 1, -1, -1):
            out, _, fn = self._records[idx]
            if trace is not None:
                trace.append(idx)
            if out.grad is None:
                continue
            fn(out.grad)

        result: dict[str, np.ndarray] = {}
        if params is not None:
            for key, p in params.items():
                result[key] = p.grad if p.grad is not None else np.zeros_like(p.data)
        self._records.clear()
        return result


def backward(loss: Tensor, tape: Tape, params: Mapping[str, Tensor] | None = None
             ) -> dict[str, np.ndarray]:
    return tape.backward(loss, params)
