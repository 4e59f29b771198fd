"""The position-aware decay weighted network and its aspect-blind baselines.

All three networks share one interface: a ``params`` dict of named
:class:`Tensor` objects and ``forward(batch, training, rng)`` returning a
:class:`ForwardTrace` whose ``probs`` tensor feeds the loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import DecaySpec, TrainConfig, decay
from .numeric import Tensor, glorot_init, ops, zeros_init


def encode_positions(length: int, k_s: int, k_e: int) -> np.ndarray:
    """Relative position of every token to the aspect span ``[k_s, k_e]`` (1-based).

    Aspect tokens get 1; the value grows by one per token moving away on
    either side.
    """
    if not 1 <= k_s <= k_e <= length:
        raise ValueError(f"aspect span [{k_s}, {k_e}] invalid for length {length}")
    i = np.arange(1, length + 1)
    return np.where(i < k_s, k_s - i + 1, np.where(i > k_e, i - k_e + 1, 1))


@dataclass
class ForwardTrace:
    probs: Tensor                     # (B, C)
    hidden: np.ndarray | None = None  # (B, T, d_h)
    alpha: np.ndarray | None = None   # (B, T)
    decay: np.ndarray | None = None   # (B, T)
    Z: np.ndarray | None = None       # (B, T, d_h)
    O: np.ndarray | None = None       # (B, d_h)
    Q: np.ndarray | None = None       # (B, penultimate)


def _embedding_table(config: TrainConfig, vocab_size: int, rng: np.random.Generator,
                     embeddings: np.ndarray | None) -> Tensor:
    dt = config.np_dtype
    if embeddings is not None:
        embeddings = np.asarray(embeddings)
        if embeddings.shape != (vocab_size, config.d_w):
            raise ValueError(
                f"embedding matrix dims {embeddings.shape} != ({vocab_size}, {config.d_w})")
        table = embeddings.astype(dt, copy=True)
    else:
        # no pretrained vectors: small random rows, padding row stays zero
        table = rng.uniform(-0.1, 0.1, size=(vocab_size, config.d_w)).astype(dt)
        table[0] = 0.0
    return Tensor(table, name="word_emb", requires_grad=not config.freeze_embeddings)


def _lstm_params(config: TrainConfig, d_in: int, rng: np.random.Generator) -> dict[str, Tensor]:
    dt, H = config.np_dtype, config.d_h
    b = np.zeros(4 * H, dtype=dt)
    b[H:2 * H] = 1.0  # forget gate
    return {
        "lstm_W_ih": glorot_init((4 * H, d_in), rng, dt, "lstm_W_ih"),
        "lstm_W_hh": glorot_init((4 * H, H), rng, dt, "lstm_W_hh"),
        "lstm_b": Tensor(b, name="lstm_b", requires_grad=True),
    }


def _head_params(config: TrainConfig, d_in: int, rng: np.random.Generator) -> dict[str, Tensor]:
    dt = config.np_dtype
    return {
        "W_o": glorot_init((config.penultimate, d_in), rng, dt, "W_o"),
        "b_o": zeros_init((config.penultimate,), dt, "b_o"),
        "W_q": glorot_init((config.n_classes, config.penultimate), rng, dt, "W_q"),
        "b_q": zeros_init((config.n_classes,), dt, "b_q"),
    }


def init_pdn_params(config: TrainConfig, vocab_size: int, rng: np.random.Generator,
                    embeddings: np.ndarray | None = None) -> dict[str, Tensor]:
    dt = config.np_dtype
    params = {"word_emb": _embedding_table(config, vocab_size, rng, embeddings),
              "pos_emb": Tensor(rng.uniform(-0.1, 0.1, size=(config.max_len, config.d_p)).astype(dt),
                                name="pos_emb", requires_grad=True)}
    params.update(_lstm_params(config, config.d_w, rng))
    a_in = config.pan_lstm_hidden + config.pan_pos_hidden
    params.update({
        "W_p": glorot_init((config.pan_pos_hidden, config.d_p), rng, dt, "W_p"),
        "b_p": zeros_init((config.pan_pos_hidden,), dt, "b_p"),
        "W_h": glorot_init((config.pan_lstm_hidden, config.d_h), rng, dt, "W_h"),
        "b_h": zeros_init((config.pan_lstm_hidden,), dt, "b_h"),
        "W_a": glorot_init((config.attn_hidden, a_in), rng, dt, "W_a"),
        "b_a": zeros_init((config.attn_hidden,), dt, "b_a"),
        "v": glorot_init((config.attn_hidden,), rng, dt, "v"),
    })
    params.update(_head_params(config, config.d_h, rng))
    return params


def pdn_param_count(config: TrainConfig, vocab_size: int) -> int:
    """Trainable scalar count: embeddings + LSTM + attention + head (decay adds none)."""
    H, a_in = config.d_h, config.pan_lstm_hidden + config.pan_pos_hidden
    embeddings = vocab_size * config.d_w + config.max_len * config.d_p
    lstm = 4 * H * (config.d_w + H) + 4 * H
    pan = (config.pan_pos_hidden * (config.d_p + 1) + config.pan_lstm_hidden * (H + 1)
           + config.attn_hidden * (a_in + 1) + config.attn_hidden)
    head = config.penultimate * (H + 1) + config.n_classes * (config.penultimate + 1)
    return embeddings + lstm + pan + head


# -- PDN building blocks ------------------------------------------------------

def lstm_forward(inputs: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return ops.lstm(inputs, params["lstm_W_ih"], params["lstm_W_hh"], params["lstm_b"])


def pan_attention(h: Tensor, P: Tensor, mask, params: Mapping[str, Tensor]) -> Tensor:
    """Attention weights from LSTM states and position embeddings."""
    P_proj = ops.selu(ops.affine(P, params["W_p"], params["b_p"]))
    h_proj = ops.selu(ops.affine(h, params["W_h"], params["b_h"]))
    H = ops.relu(ops.affine(ops.concat([h_proj, P_proj]), params["W_a"], params["b_a"]))
    e = ops.tanh_act(ops.matvec(H, params["v"]))
    return ops.masked_softmax(e, mask)


def decay_weights(position_ids: np.ndarray, spec: DecaySpec) -> np.ndarray:
    return np.asarray(decay(spec, position_ids))


def dwn_combine(h: Tensor, alpha: Tensor, position_ids: np.ndarray, spec: DecaySpec,
                _break_gradient: bool = False) -> tuple[Tensor, Tensor, np.ndarray]:
    """Scale each state by its decay weight, then pool with the attention weights.

    Returns ``(O, Z, d)``.
    """
    d = decay_weights(position_ids, spec)
    Z = ops.scale_steps(h, d, _break_gradient=_break_gradient)
    return ops.weighted_sum(alpha, Z), Z, d


def classify(O: Tensor, params: Mapping[str, Tensor], training: bool, dropout: float,
             rng: np.random.Generator | None) -> tuple[Tensor, Tensor]:
    """Linear penultimate layer, dropout, softmax output. Returns ``(probs, Q)``."""
    Q = ops.affine(O, params["W_o"], params["b_o"])
    Qd = ops.dropout(Q, dropout, training, rng)
    return ops.softmax(ops.affine(Qd, params["W_q"], params["b_q"])), Q


def pdn_forward(batch, params: Mapping[str, Tensor], spec: DecaySpec, training: bool = False,
                rng: np.random.Generator | None = None, dropout: float = 0.5,
                _break_decay_gradient: bool = False) -> ForwardTrace:
    pos_rows = np.minimum(batch.position_ids, params["pos_emb"].data.shape[0]) - 1
    x = ops.embedding(params["word_emb"], batch.token_ids)
    P = ops.embedding(params["pos_emb"], pos_rows)
    h = lstm_forward(x, params)
    alpha = pan_attention(h, P, batch.mask, params)
    O, Z, d = dwn_combine(h, alpha, batch.position_ids, spec, _break_decay_gradient)
    probs, Q = classify(O, params, training, dropout, rng)
    return ForwardTrace(probs, h.data, alpha.data, d, Z.data, O.data, Q.data)


# -- networks -----------------------------------------------------------------

class Network:
    kind = ""

    def __init__(self, config: TrainConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    def forward(self, batch, training: bool = False,
                rng: np.random.Generator | None = None) -> ForwardTrace:
        raise NotImplementedError

    def predict_proba(self, batch) -> np.ndarray:
        return self.forward(batch, training=False).probs.data

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values() if p.requires_grad)


class PDN(Network):
    kind = "pdn"

    def __init__(self, config: TrainConfig, vocab_size: int | None = None,
                 rng: np.random.Generator | None = None, embeddings: np.ndarray | None = None,
                 params: dict[str, Tensor] | None = None):
        if params is None:
            params = init_pdn_params(config, vocab_size, rng, embeddings)
        super().__init__(config, params)
        self.break_decay_gradient = False

    def forward(self, batch, training=False, rng=None) -> ForwardTrace:
        return pdn_forward(batch, self.params, self.config.decay, training, rng,
                           self.config.dropout, self.break_decay_gradient)


class NBOW(Network):
    """Sum of word embeddings, then the same linear-dropout-softmax head."""

    kind = "nbow"

    def __init__(self, config: TrainConfig, vocab_size: int | None = None,
                 rng: np.random.Generator | None = None, embeddings: np.ndarray | None = None,
                 params: dict[str, Tensor] | None = None):
        if params is None:
            params = {"word_emb": _embedding_table(config, vocab_size, rng, embeddings)}
            params.update(_head_params(config, config.d_w, rng))
        super().__init__(config, params)

    def forward(self, batch, training=False, rng=None) -> ForwardTrace:
        # sort ids per row so the summation order, and hence the bits, ignore word order
        ids = np.where(batch.mask, batch.token_ids, np.iinfo(np.int64).max)
        ids = np.sort(ids, axis=1)
        mask = ids != np.iinfo(np.int64).max
        ids = np.where(mask, ids, 0)
        x = ops.embedding(self.params["word_emb"], ids)
        O = ops.masked_sum(x, mask)
        probs, Q = classify(O, self.params, training, self.config.dropout, rng)
        return ForwardTrace(probs, O=O.data, Q=Q.data)


class LSTMBaseline(Network):
    """Last valid LSTM state of the sentence; no aspect or position input."""

    kind = "lstm"

    def __init__(self, config: TrainConfig, vocab_size: int | None = None,
                 rng: np.random.Generator | None = None, embeddings: np.ndarray | None = None,
                 params: dict[str, Tensor] | None = None):
        if params is None:
            params = {"word_emb": _embedding_table(config, vocab_size, rng, embeddings)}
            params.update(_lstm_params(config, config.d_w, rng))
            params.update(_head_params(config, config.d_h, rng))
        super().__init__(config, params)

    def forward(self, batch, training=False, rng=None) -> ForwardTrace:
        x = ops.embedding(self.params["word_emb"], batch.token_ids)
        h = lstm_forward(x, self.params)
        last = ops.take_steps(h, batch.mask.sum(axis=1) - 1)
        probs, Q = classify(last, self.params, training, self.config.dropout, rng)
        return ForwardTrace(probs, hidden=h.data, O=last.data, Q=Q.data)


NETWORKS = {cls.kind: cls for cls in (PDN, NBOW, LSTMBaseline)}


def build_network(config: TrainConfig, vocab_size: int, rng: np.random.Generator,
                  embeddings: np.ndarray | None = None) -> Network:
    return NETWORKS[config.model](config, vocab_size, rng, embeddings)


def network_from_params(config: TrainConfig, params: dict[str, Tensor]) -> Network:
    for p in params.values():
        p.data = p.data.astype(config.np_dtype, copy=False)
        p.requires_grad = True
    if "word_emb" in params:
        params["word_emb"].requires_grad = not config.freeze_embeddings
    return NETWORKS[config.model](config, params=params)
