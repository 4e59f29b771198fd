"""Whole-model gradient check against central finite differences."""

from __future__ import annotations

import numpy as np

from .config import DECAY_KINDS, DecaySpec, TrainConfig
from .data import Example, Vocab, make_batch
from .model import NETWORKS, Network
from .numeric import Tape, finite_difference_grad, ops, relative_error

TOLERANCE = 1e-4


def small_config(n: int = 6, decay: DecaySpec | None = None, model: str = "pdn") -> TrainConfig:
    return TrainConfig(model=model, d_w=8, d_p=4, d_h=6, pan_pos_hidden=5, pan_lstm_hidden=5,
                       attn_hidden=4, penultimate=7, max_len=max(n, 1), dropout=0.5,
                       dtype="float64", decay=decay or DecaySpec())


def random_setup(seed: int, n: int = 6, kind: str | None = None, model: str = "pdn",
                 vocab_size: int = 10):
    """A small float64 network plus one random labeled example of length ``n``."""
    rng = np.random.default_rng(seed)
    if kind is None:
        kind = DECAY_KINDS[int(rng.integers(len(DECAY_KINDS)))]
    spec = DecaySpec(kind, float(rng.uniform(0.2, 2.0)))
    config = small_config(n, spec, model)
    vocab = Vocab(f"t{i}" for i in range(vocab_size))
    net = NETWORKS[model](config, len(vocab), rng)
    # push parameters off zero so biases are exercised too
    for p in net.params.values():
        p.data += rng.normal(0.0, 0.3, size=p.data.shape)
    tokens = [f"t{i}" for i in rng.integers(vocab_size, size=n)]
    ks = int(rng.integers(1, n + 1))
    ke = int(rng.integers(ks, min(n, ks + 2) + 1))
    label = ("negative", "neutral", "positive")[int(rng.integers(3))]
    batch = make_batch([Example(tokens, (ks, ke), label)], vocab, config.max_len)
    return net, batch


def loss_of(net: Network, batch) -> float:
    return float(ops.cross_entropy(net.forward(batch).probs, batch.labels).data)


def check_network(net: Network, batch, h: float = 1e-5) -> dict[str, float]:
    """Worst relative error per parameter tensor, tape gradient vs finite differences."""
    with Tape() as tape:
        loss = ops.cross_entropy(net.forward(batch).probs, batch.labels)
    grads = tape.backward(loss, net.params)
    errors = {}
    for name, p in net.params.items():
        numeric = finite_difference_grad(lambda _: loss_of(net, batch), p.data, h)
        errors[name] = relative_error(grads[name], numeric)
    return errors


def run_gradcheck(seed: int = 0, n: int = 6, kind: str | None = None, model: str = "pdn",
                  break_decay_gradient: bool = False) -> dict[str, float]:
    net, batch = random_setup(seed, n, kind, model)
    if break_decay_gradient:
        net.break_decay_gradient = True
    return check_network(net, batch)
