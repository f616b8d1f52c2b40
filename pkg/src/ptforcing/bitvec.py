"""Finite bit strings and the interleaved coding of ordered k-partitions.

A :class:`BitString` is stored as a Python int (bit ``x`` of the int is
position ``x`` of the string) plus an explicit length, so prefix, overwrite
and mask operations are single integer operations.  The canonical text form
is a run of ``0``/``1`` characters with position 0 leftmost; the empty string
is ``""``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class LengthError(ValueError):
    """Raised when a length precondition of a bit-string operation fails."""


@dataclass(frozen=True, slots=True)
class BitString:
    value: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 0:
            raise LengthError("negative length")
        if self.value < 0 or self.value >> self.length:
            raise LengthError(f"value {self.value} does not fit in {self.length} bits")

    # -- construction -----------------------------------------------------
    @classmethod
    def parse(cls, text: str) -> BitString:
        text = text.strip()
        if text in ("", "ε"):
            return cls(0, 0)
        if set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        value = 0
        for x, ch in enumerate(text):
            if ch == "1":
                value |= 1 << x
        return cls(value, len(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitString:
        value = 0
        n = 0
        for n, b in enumerate(bits, start=1):
            if b:
                value |= 1 << (n - 1)
        return cls(value, n)

    @classmethod
    def from_positions(cls, positions: Iterable[int], length: int) -> BitString:
        value = 0
        for x in positions:
            if not 0 <= x < length:
                raise LengthError(f"position {x} outside 0..{length - 1}")
            value |= 1 << x
        return cls(value, length)

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> BitString:
        return cls((1 << length) - 1, length)

    @classmethod
    def random(cls, length: int, rng: random.Random, density: float = 0.5) -> BitString:
        return cls.from_bits(int(rng.random() < density) for _ in range(length))

    # -- container protocol -------------------------------------------------
    def __len__(self) -> int:
        return self.length

    def __getitem__(self, x: int) -> int:
        if x < 0:
            x += self.length
        if not 0 <= x < self.length:
            raise IndexError(x)
        return (self.value >> x) & 1

    def bit(self, x: int) -> int:
        """Bit at ``x``; positions past the end read as 0."""
        return (self.value >> x) & 1 if x >= 0 else 0

    def __iter__(self) -> Iterator[int]:
        v = self.value
        for _ in range(self.length):
            yield v & 1
            v >>= 1

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self)

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    # -- set reading ---------------------------------------------------------
    def positions(self) -> list[int]:
        v, out, x = self.value, [], 0
        while v:
            if v & 1:
                out.append(x)
            v >>= 1
            x += 1
        return out

    def count(self) -> int:
        return self.value.bit_count()

    def complement(self) -> BitString:
        return BitString(((1 << self.length) - 1) & ~self.value, self.length)

    def __and__(self, other: BitString) -> BitString:
        n = max(self.length, other.length)
        return BitString(self.value & other.value, n)

    def __or__(self, other: BitString) -> BitString:
        n = max(self.length, other.length)
        return BitString(self.value | other.value, n)

    # -- string reading -------------------------------------------------------
    def prefix(self, n: int) -> BitString:
        if n > self.length:
            raise LengthError(f"prefix {n} longer than string of length {self.length}")
        return BitString(self.value & ((1 << n) - 1), n)

    def is_prefix_of(self, other: BitString) -> bool:
        return self.length <= other.length and other.prefix(self.length) == self

    def padded(self, n: int) -> BitString:
        """Extend with zeros to length ``n`` (never truncates)."""
        if n < self.length:
            raise LengthError(f"cannot pad length {self.length} down to {n}")
        return BitString(self.value, n)

    def truncated(self, n: int) -> BitString:
        """Cut or zero-pad to exactly ``n`` bits."""
        return BitString(self.value & ((1 << n) - 1), n)

    def concat(self, other: BitString) -> BitString:
        return BitString(self.value | (other.value << self.length), self.length + other.length)

    def with_bit(self, x: int, b: int) -> BitString:
        n = max(self.length, x + 1)
        v = self.value | (1 << x) if b else self.value & ~(1 << x)
        return BitString(v, n)


EMPTY = BitString(0, 0)


def bs(text: str) -> BitString:
    """Shorthand for :meth:`BitString.parse`."""
    return BitString.parse(text)


@dataclass(frozen=True)
class GroundSets:
    """The set ``A`` being split and the side oracle ``C`` over ``0..N-1``."""

    A: BitString
    C: BitString

    def __post_init__(self) -> None:
        if self.A.length != self.C.length:
            raise LengthError("A and C must have the same length")

    @property
    def universe_size(self) -> int:
        return self.A.length

    @property
    def A_bar(self) -> BitString:
        return self.A.complement()

    @classmethod
    def random(cls, n: int, seed: int) -> GroundSets:
        rng = random.Random(seed)
        return cls(BitString.random(n, rng), BitString.random(n, rng))


def overwrite(X: BitString, sigma: BitString) -> BitString:
    """``X/σ``: replace the first ``|σ|`` bits of ``X`` by ``σ``."""
    if sigma.length > X.length:
        raise LengthError(f"|σ|={sigma.length} exceeds |X|={X.length}")
    low = (1 << sigma.length) - 1
    return BitString((X.value & ~low) | sigma.value, X.length)


def subset_leq(sigma: BitString, rho: BitString) -> bool:
    """Set inclusion of the 1-positions; positions past ``|ρ|`` count as 0."""
    return sigma.value & ~rho.value == 0


def restrict(sigma: BitString, S: BitString) -> BitString:
    """``σ^S``: keep the 1s of ``σ`` that lie in ``S``."""
    if S.length < sigma.length:
        raise LengthError(f"mask of length {S.length} shorter than string of length {sigma.length}")
    return BitString(sigma.value & S.value, sigma.length)


def interleave(parts: Sequence[BitString]) -> BitString:
    """Position-major code of ``X_0 ⊕ … ⊕ X_{k-1}``: bit ``k·x+j`` is ``X_j(x)``."""
    if not parts:
        raise ValueError("need at least one part")
    L = parts[0].length
    if any(p.length != L for p in parts):
        raise LengthError("parts must have equal length")
    k = len(parts)
    value = 0
    for j, p in enumerate(parts):
        v, x = p.value, 0
        while v:
            if v & 1:
                value |= 1 << (k * x + j)
            v >>= 1
            x += 1
    return BitString(value, k * L)


def deinterleave(code: BitString, k: int) -> tuple[BitString, ...]:
    if k <= 0:
        raise ValueError("k must be positive")
    if code.length % k:
        raise LengthError(f"code length {code.length} is not a multiple of {k}")
    L = code.length // k
    vals = [0] * k
    v = code.value
    for x in range(L):
        col = v & ((1 << k) - 1)
        v >>= k
        j = 0
        while col:
            if col & 1:
                vals[j] |= 1 << x
            col >>= 1
            j += 1
    return tuple(BitString(val, L) for val in vals)


def columns(code: BitString, k: int) -> list[int]:
    """Per-position k-bit columns of a partition code (bit ``j`` = part ``j``)."""
    if code.length % k:
        raise LengthError(f"code length {code.length} is not a multiple of {k}")
    mask = (1 << k) - 1
    v = code.value
    out = []
    for _ in range(code.length // k):
        out.append(v & mask)
        v >>= k
    return out


def from_columns(cols: Sequence[int], k: int) -> BitString:
    value = 0
    for x, col in enumerate(cols):
        value |= col << (k * x)
    return BitString(value, k * len(cols))
