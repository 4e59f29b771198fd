"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
(non-finite training values, or a failed gradient check).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import REPORTED_LAMBDAS, DecaySpec, TrainConfig
from .data import (LABELS, DataError, Example, Vocab, find_span, load_embeddings, read_examples,
                   tokenize, write_tsv)
from .gradcheck import TOLERANCE, run_gradcheck
from .model import network_from_params
from .synth import synth_generate
from .training import (NumericError, attention_dump, evaluate, majority_baseline, predict_proba,
                       summarize, train)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("PDN_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"PDN_SEED must be an integer, got {raw!r}") from None


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {path}")
    return p


def build_parser() -> argparse.ArgumentParser:
    d = TrainConfig()
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="pdn", description="Position-aware decay weighted network for "
                     "aspect-term sentiment classification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write a checkpoint", formatter_class=fmt)
    p.add_argument("--train", required=True, help="training data (.xml or .tsv)")
    p.add_argument("--dev", help="held-out data scored after every epoch")
    p.add_argument("--format", choices=("xml", "tsv"), help="override extension-based dispatch")
    p.add_argument("--embeddings", help="pretrained vectors, one 'token v1 ... vd' per line")
    p.add_argument("--model", choices=("pdn", "nbow", "lstm"), default=d.model,
                   help="network: decay weighted PDN or an aspect-blind baseline")
    p.add_argument("--decay", choices=("inverse", "expo", "tangent"), default="inverse",
                   help="decay function applied to relative positions")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="decay constant; defaults to inverse 1.1333, expo 0.3, tangent 0.45")
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to $PDN_SEED, then 0)")
    p.add_argument("--out", default="pdn.ckpt", help="checkpoint path")
    p.add_argument("--report", help="also write the per-epoch report lines to this file")
    p.add_argument("--epochs", type=int, default=d.epochs, help="training epochs")
    p.add_argument("--batch-size", type=int, default=d.batch_size, help="examples per batch")
    p.add_argument("--lr", type=float, default=d.lr, help="Adam initial learning rate")
    p.add_argument("--dropout", type=float, default=d.dropout,
                   help="dropout probability on the penultimate layer")
    p.add_argument("--d-w", type=int, default=d.d_w, help="word embedding size")
    p.add_argument("--d-p", type=int, default=d.d_p, help="position embedding size")
    p.add_argument("--d-h", type=int, default=d.d_h, help="LSTM hidden units")
    p.add_argument("--pan-hidden", type=int, default=d.pan_lstm_hidden,
                   help="units of each layer fully connected to the LSTM and position embeddings")
    p.add_argument("--attn-hidden", type=int, default=d.attn_hidden,
                   help="units of the attention layer scored by the vector v")
    p.add_argument("--penultimate", type=int, default=d.penultimate,
                   help="units of the penultimate fully connected layer")
    p.add_argument("--max-len", type=int, default=d.max_len, help="maximum sentence length n")
    p.add_argument("--freeze-embeddings", action="store_true",
                   help="keep word embeddings fixed during training")
    p.add_argument("--dtype", choices=("float32", "float64"), default=d.dtype,
                   help="floating point precision for training")

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a labeled file", formatter_class=fmt)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=("xml", "tsv"))

    p = sub.add_parser("predict", help="classify one sentence for one aspect", formatter_class=fmt)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--aspect", required=True)
    p.add_argument("--dump-attention", action="store_true",
                   help="append per-token position, decay and attention weights")

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter gradient",
                       formatter_class=fmt)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=6, help="sentence length")
    p.add_argument("--decay", choices=("inverse", "expo", "tangent"),
                   help="decay kind (default: drawn from the seed)")
    p.add_argument("--model", choices=("pdn", "nbow", "lstm"), default="pdn")
    p.add_argument("--break-decay-gradient", action="store_true",
                   help="debug: drop the decay factor in the backward pass (must fail)")

    p = sub.add_parser("synth", help="write a synthetic position-sensitive dataset",
                       formatter_class=fmt)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("majority", help="majority-class baseline accuracy", formatter_class=fmt)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=("xml", "tsv"))
    return parser


def _config_from_args(args, seed: int) -> TrainConfig:
    kind = DecaySpec(args.decay).kind
    lam = REPORTED_LAMBDAS[kind] if args.lam is None else args.lam
    return TrainConfig(model=args.model, d_w=args.d_w, d_p=args.d_p, d_h=args.d_h,
                       pan_pos_hidden=args.pan_hidden, pan_lstm_hidden=args.pan_hidden,
                       attn_hidden=args.attn_hidden, penultimate=args.penultimate,
                       dropout=args.dropout, batch_size=args.batch_size, epochs=args.epochs,
                       lr=args.lr, max_len=args.max_len, seed=seed, decay=DecaySpec(kind, lam),
                       freeze_embeddings=args.freeze_embeddings, dtype=args.dtype)


def cmd_train(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        config = _config_from_args(args, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    train_path = _existing(args.train)
    dev_path = _existing(args.dev) if args.dev else None
    emb_path = _existing(args.embeddings) if args.embeddings else None
    out = Path(args.out)
    if not out.parent.is_dir():
        raise DataError(f"output directory does not exist: {out.parent}")

    examples = read_examples(train_path, args.format)
    dev = read_examples(dev_path, args.format) if dev_path else None
    vocab = Vocab.build(examples)
    emb = load_embeddings(emb_path, vocab, config.d_w, config.np_dtype) if emb_path else None
    lines: list[str] = []

    def emit(report):
        line = report.to_line()
        lines.append(line)
        print(line, flush=True)

    net, vocab, reports = train(examples, dev, config, vocab=vocab, embeddings=emb, on_epoch=emit)
    save_checkpoint(out, net.params, config, vocab)
    if args.report:
        Path(args.report).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    s = summarize(reports)
    if s["final_eval_acc"] is not None:
        print(f"final_eval_acc={s['final_eval_acc']:.4f} best_eval_acc={s['best_eval_acc']:.4f} "
              f"best_epoch={s['best_epoch']}")
    print(f"checkpoint={out}")
    return 0


def _load_net(path):
    params, config, vocab = load_checkpoint(_existing(path))
    return network_from_params(config, params), vocab


def cmd_eval(args) -> int:
    net, vocab = _load_net(args.ckpt)
    examples = read_examples(_existing(args.test), args.format)
    print(f"accuracy={evaluate(examples, net, vocab):.4f}")
    return 0


def cmd_predict(args) -> int:
    net, vocab = _load_net(args.ckpt)
    tokens = tokenize(args.sentence)
    span = find_span(tokens, tokenize(args.aspect))
    if span is None:
        raise DataError(f"aspect {args.aspect!r} not found in sentence")
    ex = Example(tokens, span)
    probs = predict_proba([ex], net, vocab)[0]
    print(f"label={LABELS[int(probs.argmax())]}")
    print(" ".join(f"{lab}={probs[i]:.6f}" for i, lab in enumerate(LABELS)))
    if args.dump_attention:
        print(attention_dump(ex, net, vocab).to_text())
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    kind = DecaySpec(args.decay).kind if args.decay else None
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    errors = run_gradcheck(seed, args.n, kind, args.model, args.break_decay_gradient)
    worst = max(errors.values())
    for name, err in errors.items():
        status = "ok" if err < TOLERANCE else "FAIL"
        print(f"{name}\t{err:.3e}\t{status}")
    print(f"worst={worst:.3e} tolerance={TOLERANCE:.0e}")
    return 0 if worst < TOLERANCE else EXIT_NUMERIC


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.count <= 0:
        raise UsageError("--count must be positive")
    examples = synth_generate(args.count, np.random.default_rng(seed))
    try:
        write_tsv(examples, args.out)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc.strerror}") from None
    return 0


def cmd_majority(args) -> int:
    train_ex = read_examples(_existing(args.train), args.format)
    test_ex = read_examples(_existing(args.test), args.format)
    print(f"accuracy={majority_baseline(train_ex, test_ex):.4f}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "gradcheck": cmd_gradcheck, "synth": cmd_synth, "majority": cmd_majority}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pdn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, OSError) as exc:
        print(f"pdn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"pdn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
