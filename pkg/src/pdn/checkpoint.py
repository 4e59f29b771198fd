"""Binary checkpoint files.

Layout (little-endian)::

    b"PDN1" | u32 version | u32 len + UTF-8 JSON config | u32 len + UTF-8 vocab
    (one token per line) | u32 tensor count | per tensor: u32 len + UTF-8 name,
    u32 rank, u32 dims..., float32 values
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .config import TrainConfig
from .data import Vocab
from .numeric import Tensor

MAGIC = b"PDN1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _blob(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def encode_checkpoint(params: Mapping[str, Tensor], config: TrainConfig, vocab: Vocab) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION),
             _blob(json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")),
             _blob("\n".join(vocab.itos).encode("utf-8")),
             struct.pack("<I", len(params))]
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        parts.append(_blob(name.encode("utf-8")))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def save_checkpoint(path, params: Mapping[str, Tensor], config: TrainConfig, vocab: Vocab) -> None:
    """Write atomically: a temp file in the same directory is renamed into place."""
    path = Path(path)
    payload = encode_checkpoint(params, config, vocab)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"truncated checkpoint: need {n} bytes for {what} at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def blob(self, what: str) -> bytes:
        return self.take(self.u32(what + " length"), what)


def decode_checkpoint(data: bytes) -> tuple[dict[str, Tensor], TrainConfig, Vocab]:
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version} at offset 4")
    at = r.pos
    try:
        config = TrainConfig.from_dict(json.loads(r.blob("config").decode("utf-8")))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"invalid config blob at offset {at}: {exc}") from exc
    vocab_text = r.blob("vocab").decode("utf-8")
    vocab = Vocab.from_lines(vocab_text.split("\n"))
    params: dict[str, Tensor] = {}
    for _ in range(r.u32("tensor count")):
        name = r.blob("tensor name").decode("utf-8")
        rank = r.u32(f"rank of {name}")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, f"dims of {name}"))
        count = int(np.prod(dims)) if rank else 1
        raw = r.take(4 * count, f"values of {name}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        params[name] = Tensor(arr, name=name, requires_grad=True)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes at offset {r.pos}")
    return params, config, vocab


def load_checkpoint(path) -> tuple[dict[str, Tensor], TrainConfig, Vocab]:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
