"""scikit-learn style wrappers around the networks and training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .checkpoint import load_checkpoint, save_checkpoint
from .config import REPORTED_LAMBDAS, DecaySpec, TrainConfig
from .data import LABELS, DataError, Example, Vocab, find_span, load_embeddings, tokenize
from .model import network_from_params
from .training import attention_dump, predict_proba, train


def check_aspect_input(X, y=None) -> list[Example]:
    """Normalize ``X`` (and optional ``y``) to a list of :class:`Example`.

    Rows may be ``Example`` objects, ``(tokens, (k_s, k_e))`` pairs with a
    1-based inclusive span, or ``(sentence, aspect)`` strings where the first
    occurrence of the aspect is used.
    """
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise TypeError("X must be a sequence of examples")
    if len(X) == 0:
        raise ValueError("X is empty")
    if y is not None and len(y) != len(X):
        raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
    out = []
    for i, row in enumerate(X):
        if isinstance(row, Example):
            ex = row
        elif isinstance(row, tuple) and len(row) == 2 and isinstance(row[0], str):
            tokens = tokenize(row[0])
            span = find_span(tokens, tokenize(row[1]))
            if span is None:
                raise DataError(f"row {i}: aspect {row[1]!r} not found in sentence")
            ex = Example(tokens, span)
        elif isinstance(row, tuple) and len(row) == 2:
            ex = Example(row[0], row[1])
        else:
            raise TypeError(f"row {i}: unsupported example type {type(row).__name__}")
        if y is not None:
            lab = y[i]
            if isinstance(lab, (int, np.integer)):
                lab = LABELS[int(lab)]
            ex = Example(ex.tokens, ex.span, str(lab))
        out.append(ex)
    return out


class _AspectClassifier(ClassifierMixin, BaseEstimator):
    _kind = ""

    def _config(self) -> TrainConfig:
        extra = {}
        if self._kind == "pdn":
            lam = REPORTED_LAMBDAS[DecaySpec(self.decay).kind] if self.lam is None else self.lam
            extra = dict(decay=DecaySpec(self.decay, lam), d_p=self.d_p,
                         pan_pos_hidden=self.pan_hidden, pan_lstm_hidden=self.pan_hidden,
                         attn_hidden=self.attn_hidden)
        if self._kind in ("pdn", "lstm"):
            extra["d_h"] = self.d_h
        return TrainConfig(model=self._kind, d_w=self.d_w, penultimate=self.penultimate,
                           dropout=self.dropout, batch_size=self.batch_size, epochs=self.epochs,
                           lr=self.lr, max_len=self.max_len, seed=self.random_state,
                           freeze_embeddings=self.freeze_embeddings, dtype=self.dtype, **extra)

    def fit(self, X, y=None, eval_set=None):
        """Train on ``X``; labels come from ``y`` or from the examples themselves.

        ``eval_set`` is an optional ``(X, y)`` pair scored after every epoch.
        """
        examples = check_aspect_input(X, y)
        if any(ex.label is None for ex in examples):
            raise ValueError("every training example needs a label")
        config = self._config()
        vocab = Vocab.build(examples)
        emb = None
        if self.embeddings is not None:
            emb = load_embeddings(self.embeddings, vocab, config.d_w, config.np_dtype)
        held_out = check_aspect_input(*eval_set) if eval_set is not None else None
        self.network_, self.vocab_, self.history_ = train(
            examples, held_out, config, vocab=vocab, embeddings=emb)
        self.config_ = config
        self.classes_ = np.array(LABELS)
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return predict_proba(check_aspect_input(X), self.network_, self.vocab_)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def save(self, path) -> None:
        check_is_fitted(self, "network_")
        save_checkpoint(path, self.network_.params, self.config_, self.vocab_)

    @classmethod
    def load(cls, path) -> "_AspectClassifier":
        params, config, vocab = load_checkpoint(path)
        est = {"pdn": PDNClassifier, "nbow": NBOWClassifier, "lstm": LSTMClassifier}[config.model]()
        est.set_params(**{k: v for k, v in _params_from_config(config).items()
                          if k in est.get_params()})
        est.network_ = network_from_params(config, params)
        est.vocab_, est.config_, est.history_ = vocab, config, []
        est.classes_ = np.array(LABELS)
        return est


def _params_from_config(c: TrainConfig) -> dict:
    return dict(decay=c.decay.kind, lam=c.decay.lam, d_w=c.d_w, d_p=c.d_p, d_h=c.d_h,
                pan_hidden=c.pan_lstm_hidden, attn_hidden=c.attn_hidden,
                penultimate=c.penultimate, dropout=c.dropout, batch_size=c.batch_size,
                epochs=c.epochs, lr=c.lr, max_len=c.max_len, random_state=c.seed,
                freeze_embeddings=c.freeze_embeddings, dtype=c.dtype)


class PDNClassifier(_AspectClassifier):
    """Position-aware decay weighted network.

    ``lam=None`` picks the reported constant for the chosen decay kind
    (inverse 1.1333, exponential 0.3, tangent 0.45).
    """

    _kind = "pdn"

    def __init__(self, decay="inverse", lam=None, d_w=300, d_p=25, d_h=100, pan_hidden=50,
                 attn_hidden=50, penultimate=64, dropout=0.5, batch_size=20, epochs=30,
                 lr=0.001, max_len=80, embeddings=None, freeze_embeddings=False,
                 dtype="float32", random_state=0):
        self.decay = decay
        self.lam = lam
        self.d_w = d_w
        self.d_p = d_p
        self.d_h = d_h
        self.pan_hidden = pan_hidden
        self.attn_hidden = attn_hidden
        self.penultimate = penultimate
        self.dropout = dropout
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.max_len = max_len
        self.embeddings = embeddings
        self.freeze_embeddings = freeze_embeddings
        self.dtype = dtype
        self.random_state = random_state

    def explain(self, example):
        """Per-token attention and decay report for a single example."""
        check_is_fitted(self, "network_")
        return attention_dump(check_aspect_input([example])[0], self.network_, self.vocab_)


class NBOWClassifier(_AspectClassifier):
    """Sum of word embeddings; ignores both word order and the aspect."""

    _kind = "nbow"

    def __init__(self, d_w=300, penultimate=64, dropout=0.5, batch_size=20, epochs=30, lr=0.001,
                 max_len=80, embeddings=None, freeze_embeddings=False, dtype="float32",
                 random_state=0):
        self.d_w = d_w
        self.penultimate = penultimate
        self.dropout = dropout
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.max_len = max_len
        self.embeddings = embeddings
        self.freeze_embeddings = freeze_embeddings
        self.dtype = dtype
        self.random_state = random_state


class LSTMClassifier(_AspectClassifier):
    """Final LSTM state of the sentence; ignores the aspect."""

    _kind = "lstm"

    def __init__(self, d_w=300, d_h=100, penultimate=64, dropout=0.5, batch_size=20, epochs=30,
                 lr=0.001, max_len=80, embeddings=None, freeze_embeddings=False,
                 dtype="float32", random_state=0):
        self.d_w = d_w
        self.d_h = d_h
        self.penultimate = penultimate
        self.dropout = dropout
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr = lr
        self.max_len = max_len
        self.embeddings = embeddings
        self.freeze_embeddings = freeze_embeddings
        self.dtype = dtype
        self.random_state = random_state

