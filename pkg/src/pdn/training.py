"""Training loop, accuracy, baselines and attention introspection."""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import TrainConfig
from .data import LABEL_INDEX, LABELS, Example, Vocab, make_batch, make_batches, truncate
from .model import PDN, Network, build_network, encode_positions
from .numeric import AdamState, Tape, adam_step, ops

log = logging.getLogger(__name__)


class NumericError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, tensor: str):
        self.epoch, self.batch, self.tensor = epoch, batch, tensor
        super().__init__(f"non-finite value at epoch {epoch}, batch {batch}, in {tensor}")


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    train_acc: float
    eval_acc: float | None
    wall_time: float

    def to_line(self, with_time: bool = False) -> str:
        """``key=value`` line; wall time is left out unless asked for so runs compare bit-exactly."""
        parts = [f"epoch={self.epoch}", f"loss={self.train_loss!r}", f"train_acc={self.train_acc!r}",
                 f"eval_acc={self.eval_acc!r}" if self.eval_acc is not None else "eval_acc=NA"]
        if with_time:
            parts.append(f"time={self.wall_time:.3f}")
        return " ".join(parts)


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for init, shuffling and dropout derived from one seed."""
    init, shuffle, drop = np.random.SeedSequence(seed).spawn(3)
    return {"init": np.random.default_rng(init), "shuffle": np.random.default_rng(shuffle),
            "dropout": np.random.default_rng(drop)}


def _check_finite(net: Network, grads: dict[str, np.ndarray], loss: float, epoch: int,
                  batch: int) -> None:
    if not np.isfinite(loss):
        bad = next((k for k, g in grads.items() if not np.isfinite(g).all()), "loss")
        raise NumericError(epoch, batch, bad)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(epoch, batch, f"grad[{name}]")
    for name, p in net.params.items():
        if not np.isfinite(p.data).all():
            raise NumericError(epoch, batch, name)


def train_step(net: Network, batch, state: AdamState, rng: np.random.Generator
               ) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
    """One forward/backward/update; returns (loss, probs, grads)."""
    with Tape() as tape:
        trace = net.forward(batch, training=True, rng=rng)
        loss = ops.cross_entropy(trace.probs, batch.labels)
    grads = tape.backward(loss, net.params)
    return float(loss.data), trace.probs.data, grads


def train(train_examples: Sequence[Example], eval_examples: Sequence[Example] | None,
          config: TrainConfig, net: Network | None = None, vocab: Vocab | None = None,
          embeddings: np.ndarray | None = None,
          on_epoch: Callable[[EpochReport], bool | None] | None = None
          ) -> tuple[Network, Vocab, list[EpochReport]]:
    """Train a network per ``config``; deterministic for a fixed ``config.seed``.

    The vocabulary comes from the training examples unless one is passed.
    ``on_epoch`` sees each report as it is produced; returning True from it
    stops training after that epoch.
    """
    if not train_examples:
        raise ValueError("no training examples")
    streams = seed_streams(config.seed)
    if vocab is None:
        vocab = Vocab.build(train_examples)
    if net is None:
        net = build_network(config, len(vocab), streams["init"], embeddings)
    state = AdamState(lr=config.lr)
    reports: list[EpochReport] = []
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        batches = make_batches(train_examples, vocab, config.max_len, config.batch_size,
                               streams["shuffle"], shuffle=True)
        total_loss, correct, seen = 0.0, 0, 0
        for b_idx, batch in enumerate(batches):
            loss, probs, grads = train_step(net, batch, state, streams["dropout"])
            _check_finite(net, grads, loss, epoch, b_idx)
            adam_step(net.params, grads, state)
            total_loss += loss * len(batch)
            correct += int((probs.argmax(axis=1) == batch.labels).sum())
            seen += len(batch)
        eval_acc = evaluate(eval_examples, net, vocab) if eval_examples else None
        report = EpochReport(epoch, total_loss / seen, correct / seen, eval_acc,
                             time.perf_counter() - start)
        reports.append(report)
        log.info(report.to_line(with_time=True))
        if on_epoch is not None and on_epoch(report):
            break
    return net, vocab, reports


def predict_proba(examples: Sequence[Example], net: Network, vocab: Vocab,
                  batch_size: int = 100) -> np.ndarray:
    out = []
    for s in range(0, len(examples), batch_size):
        batch = make_batch(examples[s:s + batch_size], vocab, net.config.max_len)
        out.append(net.predict_proba(batch))
    return np.concatenate(out, axis=0)


def evaluate(examples: Sequence[Example], net: Network, vocab: Vocab) -> float:
    """Accuracy with dropout off; argmax ties go to the lowest class index."""
    if not examples:
        raise ValueError("cannot evaluate on an empty set")
    preds = predict_proba(examples, net, vocab).argmax(axis=1)
    labels = np.array([ex.label_id for ex in examples])
    return float((preds == labels).sum()) / len(examples)


def summarize(reports: Sequence[EpochReport]) -> dict[str, float | int | None]:
    """Final-epoch and best-epoch evaluation accuracy."""
    scored = [r for r in reports if r.eval_acc is not None]
    if not scored:
        return {"final_eval_acc": None, "best_eval_acc": None, "best_epoch": None}
    best = max(scored, key=lambda r: (r.eval_acc, -r.epoch))
    return {"final_eval_acc": scored[-1].eval_acc, "best_eval_acc": best.eval_acc,
            "best_epoch": best.epoch}


def majority_baseline(train_examples: Sequence[Example], test_examples: Sequence[Example]) -> float:
    """Accuracy of always predicting the most frequent training label."""
    if not train_examples or not test_examples:
        raise ValueError("majority baseline needs nonempty train and test sets")
    counts = Counter(ex.label for ex in train_examples)
    # ties go to the lowest class index, as for argmax
    top = max(LABELS, key=lambda lab: (counts[lab], -LABEL_INDEX[lab]))
    return sum(ex.label == top for ex in test_examples) / len(test_examples)


@dataclass
class TokenWeight:
    token: str
    position: int
    decay: float
    alpha: float

    @property
    def effective(self) -> float:
        return self.alpha * self.decay


@dataclass
class AttentionReport:
    tokens: list[TokenWeight]
    label: str
    probs: dict[str, float]

    def to_text(self) -> str:
        lines = ["token\tp\tdecay\talpha\teffective"]
        for tw in self.tokens:
            lines.append(f"{tw.token}\t{tw.position}\t{tw.decay!r}\t{tw.alpha!r}\t{tw.effective!r}")
        lines.append(f"prediction\t{self.label}")
        lines.append("probs\t" + "\t".join(f"{k}={v!r}" for k, v in self.probs.items()))
        return "\n".join(lines)


def attention_dump(example: Example, net: PDN, vocab: Vocab) -> AttentionReport:
    """Per-token position, decay, attention and effective weight for one example."""
    if not isinstance(net, PDN):
        raise TypeError("attention dumps need a PDN model")
    ex = truncate(example, net.config.max_len)
    trace = net.forward(make_batch([ex], vocab, net.config.max_len), training=False)
    pos = encode_positions(len(ex.tokens), *ex.span)
    probs = trace.probs.data[0]
    rows = [TokenWeight(tok, int(p), float(trace.decay[0, t]), float(trace.alpha[0, t]))
            for t, (tok, p) in enumerate(zip(ex.tokens, pos))]
    return AttentionReport(rows, LABELS[int(probs.argmax())],
                           {lab: float(probs[i]) for i, lab in enumerate(LABELS)})
