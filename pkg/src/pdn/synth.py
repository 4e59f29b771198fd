"""Synthetic sentences whose label depends only on cue proximity to the aspect.

Each sentence holds two ``asp`` tokens. One sits close to ``goodtok`` and the
other close to ``badtok``; the aspect span marks one of them and the label is
the polarity of the cue nearest that span. Both candidate spans are equally
likely for any given token sequence, so word identity and word order alone
carry no label information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Example

ASPECT = "asp"
GOOD = "goodtok"
BAD = "badtok"
CUE_LABEL = {GOOD: "positive", BAD: "negative"}


@dataclass(frozen=True)
class DistanceProfile:
    """Ranges (inclusive) the generator draws from."""

    near: tuple[int, int] = (1, 3)       # tokens between an asp and its own cue
    separation: tuple[int, int] = (2, 6)  # filler tokens between the two asp/cue pairs
    margin: tuple[int, int] = (0, 4)     # filler tokens before and after the pairs
    n_fillers: int = 40


def filler_words(profile: DistanceProfile) -> list[str]:
    return [f"w{i}" for i in range(profile.n_fillers)]


def nearest_cue_label(tokens, span) -> str | None:
    """Label by brute force: polarity of the cue token nearest the span.

    Returns None when the nearest cues of both polarities tie.
    """
    ks, ke = span
    best: dict[str, int] = {}
    for i, tok in enumerate(tokens, start=1):
        if tok in CUE_LABEL:
            dist = ks - i if i < ks else (i - ke if i > ke else 0)
            best[tok] = min(best.get(tok, dist), dist)
    if GOOD not in best or BAD not in best or best[GOOD] == best[BAD]:
        return None
    return CUE_LABEL[GOOD] if best[GOOD] < best[BAD] else CUE_LABEL[BAD]


def _noise(rng: np.random.Generator, k: int, fillers: list[str]) -> list[str]:
    return [fillers[j] for j in rng.integers(len(fillers), size=k)]


def _pair(rng: np.random.Generator, cue: str, gap: int, fillers: list[str]) -> list[str]:
    inner = _noise(rng, gap - 1, fillers)
    if rng.random() < 0.5:
        return [cue, *inner, ASPECT]
    return [ASPECT, *inner, cue]


def _draw(rng: np.random.Generator, profile: DistanceProfile, fillers: list[str]):
    lo, hi = profile.near
    pairs = [_pair(rng, GOOD, int(rng.integers(lo, hi + 1)), fillers),
             _pair(rng, BAD, int(rng.integers(lo, hi + 1)), fillers)]
    if rng.random() < 0.5:
        pairs.reverse()
    sep = int(rng.integers(profile.separation[0], profile.separation[1] + 1))
    left = int(rng.integers(profile.margin[0], profile.margin[1] + 1))
    right = int(rng.integers(profile.margin[0], profile.margin[1] + 1))
    return (_noise(rng, left, fillers) + pairs[0] + _noise(rng, sep, fillers) + pairs[1]
            + _noise(rng, right, fillers))


def synth_generate(count: int, rng: np.random.Generator,
                   profile: DistanceProfile | None = None) -> list[Example]:
    if count <= 0:
        raise ValueError("count must be positive")
    profile = profile or DistanceProfile()
    fillers = filler_words(profile)
    out: list[Example] = []
    while len(out) < count:
        tokens = _draw(rng, profile, fillers)
        aspects = [i for i, t in enumerate(tokens, start=1) if t == ASPECT]
        pos = aspects[int(rng.integers(2))]
        label = nearest_cue_label(tokens, (pos, pos))
        other = nearest_cue_label(tokens, (sum(aspects) - pos,) * 2)
        # both candidate spans must resolve, to opposite labels
        if label is None or other is None or label == other:
            continue
        out.append(Example(tuple(tokens), (pos, pos), label))
    return out


def flip_aspect(ex: Example) -> Example:
    """The same sentence with the span moved to the other ``asp`` token."""
    aspects = [i for i, t in enumerate(ex.tokens, start=1) if t == ASPECT]
    if len(aspects) != 2:
        raise ValueError("flip_aspect needs exactly two aspect tokens")
    pos = sum(aspects) - ex.span[0]
    return Example(ex.tokens, (pos, pos), nearest_cue_label(ex.tokens, (pos, pos)))
