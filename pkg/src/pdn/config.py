"""Hyperparameters and the decay specification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

DECAY_KINDS = ("inverse", "exponential", "tangent")
_ALIASES = {"inv": "inverse", "expo": "exponential", "exp": "exponential", "tan": "tangent",
            "tanh": "tangent"}

# lambda constants the method was reported with, per decay kind
REPORTED_LAMBDAS = {"inverse": 1.1333, "exponential": 0.3, "tangent": 0.45}


@dataclass(frozen=True)
class DecaySpec:
    kind: str = "inverse"
    lam: float = REPORTED_LAMBDAS["inverse"]

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in DECAY_KINDS:
            raise ValueError(f"unknown decay kind {self.kind!r}; expected one of {DECAY_KINDS}")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"decay constant must be finite and >= 0, got {self.lam}")
        if kind == "inverse" and self.lam == 0:
            raise ValueError("inverse decay needs a positive constant")

    @classmethod
    def default_for(cls, kind: str) -> "DecaySpec":
        kind = _ALIASES.get(kind, kind)
        return cls(kind, REPORTED_LAMBDAS[kind])


def decay(spec: DecaySpec, x):
    """Decay weight for relative position(s) ``x``; scalar in, scalar out."""
    arr = np.asarray(x, dtype=np.float64)
    if spec.kind == "inverse":
        if (arr == 0).any():
            raise ValueError("singular decay input: inverse decay at x = 0")
        out = spec.lam / arr
    elif spec.kind == "exponential":
        out = np.exp(-spec.lam * arr)
    else:
        # 1 - tanh(z) == 2 e^-2z / (1 + e^-2z); the direct form cancels to 0 for z > ~19
        e = np.exp(-2.0 * spec.lam * arr)
        out = 2.0 * e / (1.0 + e)
    return float(out) if out.ndim == 0 else out


MODEL_KINDS = ("pdn", "nbow", "lstm")


@dataclass
class TrainConfig:
    model: str = "pdn"
    d_w: int = 300
    d_p: int = 25
    d_h: int = 100
    pan_pos_hidden: int = 50
    pan_lstm_hidden: int = 50
    attn_hidden: int = 50
    penultimate: int = 64
    n_classes: int = 3
    dropout: float = 0.5
    batch_size: int = 20
    epochs: int = 30
    lr: float = 0.001
    max_len: int = 80
    seed: int = 0
    decay: DecaySpec = field(default_factory=DecaySpec)
    freeze_embeddings: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if isinstance(self.decay, dict):
            self.decay = DecaySpec(**self.decay)
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODEL_KINDS}")
        for name in ("d_w", "d_p", "d_h", "pan_pos_hidden", "pan_lstm_hidden", "attn_hidden",
                     "penultimate", "n_classes", "batch_size", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)
