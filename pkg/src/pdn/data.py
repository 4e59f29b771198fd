"""Reading, tokenizing, and batching aspect-term sentiment data."""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import encode_positions

log = logging.getLogger(__name__)

LABELS = ("negative", "neutral", "positive")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    """One labeled instance; ``span`` is the 1-based inclusive aspect span."""

    tokens: tuple[str, ...]
    span: tuple[int, int]
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "span", (int(self.span[0]), int(self.span[1])))
        if not self.tokens:
            raise DataError("example has no tokens")
        ks, ke = self.span
        if not 1 <= ks <= ke <= len(self.tokens):
            raise DataError(f"span {self.span} outside 1..{len(self.tokens)}")
        if self.label is not None and self.label not in LABEL_INDEX:
            raise DataError(f"unknown label {self.label!r}")

    @property
    def aspect(self) -> tuple[str, ...]:
        return self.tokens[self.span[0] - 1:self.span[1]]

    @property
    def label_id(self) -> int:
        return LABEL_INDEX[self.label] if self.label is not None else -1


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Lowercased tokens with ``[start, end)`` character offsets into ``text``."""
    return [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def tokenize(text: str) -> list[str]:
    return [tok for tok, _, _ in tokenize_with_offsets(text)]


def char_span_to_tokens(offsets: Sequence[tuple[str, int, int]], start: int, end: int,
                        where: str = "") -> tuple[int, int]:
    """Map a character range to a 1-based inclusive token span.

    Offsets cutting through a token widen to cover it, with a warning.
    """
    hit = [i for i, (_, s, e) in enumerate(offsets) if s < end and e > start]
    if not hit:
        raise DataError(f"{where}character span [{start}, {end}) covers no token")
    first, last = hit[0], hit[-1]
    if offsets[first][1] < start or offsets[last][2] > end:
        log.warning("%scharacter span [%d, %d) not on token boundaries; widened to [%d, %d)",
                    where, start, end, offsets[first][1], offsets[last][2])
    return first + 1, last + 1


def find_span(tokens: Sequence[str], phrase: Sequence[str]) -> tuple[int, int] | None:
    """First token-level occurrence of ``phrase`` as a 1-based span."""
    k = len(phrase)
    if k == 0:
        return None
    for i in range(len(tokens) - k + 1):
        if tuple(tokens[i:i + k]) == tuple(phrase):
            return i + 1, i + k
    return None


def parse_semeval_xml(path) -> list[Example]:
    """Examples from a SemEval-2014 Task 4 file; conflict-polarity terms are dropped."""
    path = Path(path)
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        line, col = exc.position
        raise DataError(f"{path}: malformed XML at line {line}, column {col}") from exc
    out: list[Example] = []
    for sent in root.iter("sentence"):
        text_el = sent.find("text")
        if text_el is None or text_el.text is None:
            continue
        text = text_el.text
        offsets = tokenize_with_offsets(text)
        sid = sent.get("id", "?")
        for term in sent.iter("aspectTerm"):
            polarity = term.get("polarity", "").lower()
            if polarity == "conflict":
                continue
            if polarity not in LABEL_INDEX:
                raise DataError(f"{path}: sentence {sid}: unknown polarity {polarity!r}")
            start, end = int(term.get("from")), int(term.get("to"))
            span = char_span_to_tokens(offsets, start, end, where=f"{path}: sentence {sid}: ")
            out.append(Example(tuple(t for t, _, _ in offsets), span, polarity))
    return out


def parse_tsv(path) -> list[Example]:
    """Parse ``sentence<TAB>aspect<TAB>from<TAB>to<TAB>label`` lines.

    ``from``/``to`` of -1 selects the first token-level occurrence of the aspect.
    """
    path = Path(path)
    out: list[Example] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 tab-separated columns, got {len(cols)}")
            sentence, aspect, start, end, label = cols
            label = label.strip().lower()
            if label not in LABEL_INDEX:
                raise DataError(f"{path}:{lineno}: unknown label {cols[4]!r}")
            try:
                start_i, end_i = int(start), int(end)
            except ValueError:
                raise DataError(f"{path}:{lineno}: from/to must be integers") from None
            offsets = tokenize_with_offsets(sentence)
            tokens = tuple(t for t, _, _ in offsets)
            if start_i == -1 and end_i == -1:
                span = find_span(tokens, tokenize(aspect))
                if span is None:
                    raise DataError(f"{path}:{lineno}: aspect {aspect!r} not found in sentence")
            else:
                if not 0 <= start_i < end_i <= len(sentence):
                    raise DataError(f"{path}:{lineno}: bad character span [{start_i}, {end_i})")
                span = char_span_to_tokens(offsets, start_i, end_i, where=f"{path}:{lineno}: ")
            out.append(Example(tokens, span, label))
    return out


def write_tsv(examples: Iterable[Example], path) -> None:
    """Write examples with space-joined tokens and character offsets of the span."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(example_to_tsv(ex) + "\n")


def example_to_tsv(ex: Example) -> str:
    ks, ke = ex.span
    start = sum(len(t) + 1 for t in ex.tokens[:ks - 1])
    aspect = " ".join(ex.aspect)
    return f"{' '.join(ex.tokens)}\t{aspect}\t{start}\t{start + len(aspect)}\t{ex.label}"


def read_examples(path, fmt: str | None = None) -> list[Example]:
    """Dispatch on ``fmt`` or the file extension (.xml or .tsv)."""
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "xml":
        return parse_semeval_xml(path)
    if fmt in ("tsv", "txt"):
        return parse_tsv(path)
    raise DataError(f"{path}: cannot infer format; use .xml or .tsv or pass a format")


def label_counts(examples: Iterable[Example]) -> dict[str, int]:
    counts = {name: 0 for name in LABELS}
    for ex in examples:
        counts[ex.label] += 1
    return counts


class Vocab:
    """Token ids with 0 reserved for padding and 1 for unknown tokens."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @classmethod
    def build(cls, examples: Iterable[Example]) -> "Vocab":
        vocab = cls()
        for ex in examples:
            for tok in ex.tokens:
                vocab.add(tok)
        return vocab

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> "Vocab":
        if list(lines[:2]) != [PAD_TOKEN, UNK_TOKEN]:
            raise DataError("vocabulary must start with the pad and unknown tokens")
        return cls(lines[2:])

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.itos == other.itos

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]


def load_embeddings(path, vocab: Vocab, dim: int | None = None, dtype=np.float32) -> np.ndarray:
    """Embedding matrix for ``vocab`` from a ``token v1 ... vd`` text file.

    Tokens missing from the file (and the pad/unknown rows) stay all-zero.
    When a token repeats, its first entry is kept.
    """
    path = Path(path)
    matrix = None
    file_dim = None
    filled: set[int] = set()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) < 2:
                continue
            if file_dim is None:
                file_dim = len(parts) - 1
                if lineno == 1 and file_dim == 1 and parts[0].isdigit():
                    # word2vec-style "<count> <dim>" header
                    file_dim = None
                    continue
                if dim is not None and file_dim != dim:
                    raise DataError(f"{path}: embedding dimension {file_dim} != expected {dim}")
                matrix = np.zeros((len(vocab), file_dim), dtype=dtype)
            if len(parts) - 1 < file_dim:
                raise DataError(f"{path}:{lineno}: {len(parts) - 1} values, expected {file_dim}")
            extra = len(parts) - 1 - file_dim
            if extra:
                # tokens containing spaces, but only if the extra fields are not numbers
                if all(_is_number(p) for p in parts[1:1 + extra]):
                    raise DataError(f"{path}:{lineno}: {len(parts) - 1} values, expected {file_dim}")
            token = " ".join(parts[:1 + extra])
            idx = vocab.stoi.get(token)
            if idx is None or idx in (PAD, UNK):
                continue
            if idx in filled:
                log.warning("%s:%d: duplicate entry for %r ignored", path, lineno, token)
                continue
            matrix[idx] = np.asarray(parts[1 + extra:], dtype=np.float64)
            filled.add(idx)
    if matrix is None:
        raise DataError(f"{path}: no embedding vectors found")
    oov = len(vocab) - 2 - len(filled)
    log.info("loaded %d vectors of dim %d; %d of %d vocabulary tokens not covered",
             len(filled), file_dim, oov, len(vocab) - 2)
    return matrix


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def truncate(ex: Example, n: int) -> Example:
    """Cut ``ex`` to at most ``n`` tokens, keeping the aspect span roughly centered."""
    if len(ex.tokens) <= n:
        return ex
    ks, ke = ex.span
    width = ke - ks + 1
    if width > n:
        raise DataError(f"aspect span of {width} tokens does not fit a window of {n}")
    start = (ks - 1) - (n - width) // 2
    start = max(0, min(start, len(ex.tokens) - n))
    return Example(ex.tokens[start:start + n], (ks - start, ke - start), ex.label)


@dataclass
class Batch:
    token_ids: np.ndarray     # (B, T) int
    position_ids: np.ndarray  # (B, T) int, 1..n; pads hold n
    mask: np.ndarray          # (B, T) bool
    labels: np.ndarray        # (B,) int, -1 when unlabeled
    max_len: int

    def __len__(self) -> int:
        return self.token_ids.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)


def make_batch(examples: Sequence[Example], vocab: Vocab, n: int,
               pad_to: int | None = None) -> Batch:
    """Pad a list of examples; width is the longest example unless ``pad_to`` is given."""
    exs = [truncate(ex, n) for ex in examples]
    width = pad_to if pad_to is not None else max(len(ex.tokens) for ex in exs)
    B = len(exs)
    ids = np.full((B, width), PAD, dtype=np.int64)
    pos = np.full((B, width), n, dtype=np.int64)
    mask = np.zeros((B, width), dtype=bool)
    labels = np.empty(B, dtype=np.int64)
    for r, ex in enumerate(exs):
        L = len(ex.tokens)
        ids[r, :L] = vocab.encode(ex.tokens)
        pos[r, :L] = np.minimum(encode_positions(L, *ex.span), n)
        mask[r, :L] = True
        labels[r] = ex.label_id
    return Batch(ids, pos, mask, labels, n)


def make_batches(examples: Sequence[Example], vocab: Vocab, n: int, batch_size: int,
                 rng: np.random.Generator | None = None, shuffle: bool = False) -> list[Batch]:
    if not examples:
        raise DataError("no examples to batch")
    order = np.arange(len(examples))
    if shuffle:
        if rng is None:
            raise ValueError("shuffling needs an rng")
        order = rng.permutation(len(examples))
    return [make_batch([examples[i] for i in order[s:s + batch_size]], vocab, n)
            for s in range(0, len(examples), batch_size)]
