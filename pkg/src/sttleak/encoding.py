"""Leakage-obfuscating word encodings and their level classes.

The supply current of a word-parallel write only reveals the Hamming weight
of the encoded word.  For an encoding scheme this module answers: which
encoded weights ("levels") can a data word of weight ``w`` produce, and how
many data words stand behind each level.

Weight counts come from brute-force popcounts over every word for widths up
to :data:`BRUTE_FORCE_MAX_WIDTH` and from binomial coefficients above it.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .device import ParameterError
from .trace import MAX_WIDTH, Word

BRUTE_FORCE_MAX_WIDTH = 20
MAX_RANDOM_BITS = 8


class SchemeKind(str, Enum):
    NONE = "none"
    PARITY1 = "parity1"
    RANDOM = "random"


@dataclass(frozen=True)
class EncodingScheme:
    kind: SchemeKind = SchemeKind.NONE
    r: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.kind is SchemeKind.RANDOM:
            if not 1 <= self.r <= MAX_RANDOM_BITS:
                raise ParameterError(f"random scheme needs 1..{MAX_RANDOM_BITS} bits, got {self.r}")
        elif self.r != 0:
            raise ParameterError(f"scheme {self.kind.value} takes no bit count")

    @classmethod
    def random(cls, r: int) -> "EncodingScheme":
        return cls(SchemeKind.RANDOM, r)

    @classmethod
    def parse(cls, text: str) -> "EncodingScheme":
        """Accepts ``none``, ``parity1``, ``random2``, ``random(2)`` or ``random:2``."""
        t = text.strip().lower()
        if t in ("none", "parity1"):
            return cls(SchemeKind(t))
        m = re.fullmatch(r"random[(:]?(\d+)\)?", t)
        if m:
            return cls.random(int(m.group(1)))
        raise ParameterError(f"unknown encoding scheme {text!r}")

    @property
    def overhead(self) -> int:
        return {SchemeKind.NONE: 0, SchemeKind.PARITY1: 1, SchemeKind.RANDOM: self.r}[self.kind]

    @property
    def deterministic(self) -> bool:
        return self.kind is not SchemeKind.RANDOM

    def encoded_width(self, data_width: int) -> int:
        return data_width + self.overhead

    def __str__(self) -> str:
        return f"random{self.r}" if self.kind is SchemeKind.RANDOM else self.kind.value


NONE = EncodingScheme()
PARITY1 = EncodingScheme(SchemeKind.PARITY1)


def _check_width(width: int, scheme: EncodingScheme):
    if not 1 <= width or scheme.encoded_width(width) > MAX_WIDTH:
        raise ParameterError(
            f"data width {width} with scheme {scheme} exceeds the {MAX_WIDTH}-bit word limit"
        )


def encode(word: Word, scheme: EncodingScheme, seed: int = 0) -> Word:
    """Append the scheme's extra bits: even parity, or ``r`` seeded uniform bits."""
    _check_width(word.width, scheme)
    if scheme.kind is SchemeKind.NONE:
        return word
    if scheme.kind is SchemeKind.PARITY1:
        return Word(word.bits + (word.hamming_weight % 2,))
    extra = np.random.default_rng(seed).integers(0, 2, size=scheme.r)
    return Word(word.bits + tuple(int(b) for b in extra))


def decode(word: Word, scheme: EncodingScheme) -> Word:
    """Strip the scheme's extra bits."""
    if word.width <= scheme.overhead:
        raise ParameterError("encoded word is not wider than the scheme overhead")
    if scheme.overhead == 0:
        return word
    return Word(word.bits[: word.width - scheme.overhead])


def levels_for_weight(w: int, scheme: EncodingScheme) -> range:
    """Encoded weights a data word of weight ``w`` can produce."""
    if scheme.kind is SchemeKind.NONE:
        return range(w, w + 1)
    if scheme.kind is SchemeKind.PARITY1:
        lvl = w + w % 2
        return range(lvl, lvl + 1)
    return range(w, w + scheme.r + 1)


@lru_cache(maxsize=None)
def data_weight_counts(width: int) -> tuple[int, ...]:
    """Number of ``width``-bit words of each Hamming weight."""
    if width <= BRUTE_FORCE_MAX_WIDTH:
        words = np.arange(1 << width, dtype=np.uint32)
        counts = np.bincount(np.bitwise_count(words), minlength=width + 1)
        return tuple(int(c) for c in counts)
    return tuple(math.comb(width, w) for w in range(width + 1))


@lru_cache(maxsize=None)
def joint_counts(width: int, scheme: EncodingScheme) -> dict[int, dict[int, int]]:
    """``{level: {data weight: multiplicity}}`` over all data words and extra-bit patterns.

    For deterministic schemes the multiplicity is the number of data words;
    for ``random(r)`` each data word contributes once per random pattern.
    """
    _check_width(width, scheme)
    nw = data_weight_counts(width)
    table: dict[int, dict[int, int]] = {}
    if scheme.kind is SchemeKind.RANDOM:
        rand = data_weight_counts(scheme.r)
        for w, cw in enumerate(nw):
            for k, ck in enumerate(rand):
                table.setdefault(w + k, {})[w] = cw * ck
    else:
        for w, cw in enumerate(nw):
            (lvl,) = levels_for_weight(w, scheme)
            table.setdefault(lvl, {})[w] = cw
    return {lvl: table[lvl] for lvl in sorted(table)}


def level_class_sizes(width: int, scheme: EncodingScheme) -> dict[int, int]:
    """Number of distinct data words that can produce each observable level."""
    return {
        lvl: sum(data_weight_counts(width)[w] for w in by_w)
        for lvl, by_w in joint_counts(width, scheme).items()
    }


def level_probabilities(width: int, scheme: EncodingScheme) -> dict[int, float]:
    """Probability of each level under uniform data and uniform extra bits."""
    total = 1 << (width + (scheme.r if scheme.kind is SchemeKind.RANDOM else 0))
    return {lvl: sum(by_w.values()) / total for lvl, by_w in joint_counts(width, scheme).items()}
