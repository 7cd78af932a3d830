"""Exact symbolic dynamics on the unit square.

A point ``(xi, x)`` is stored as a finite window of binary digits with a
cursor.  Digits left of the cursor are the expansion of ``xi`` read
right-to-left (the digit just left of the cursor is the leading digit of
``xi``); digits right of the cursor are the expansion of ``x``.  The Baker
map moves the cursor one slot left, so forward and backward iterates are
lossless until the cursor runs out of digits.

Expansion conventions inside the window:

* ``x`` side: dyadic rationals in (0, 1] use the expansion ending in ones,
  truncated to the window (``1/2 -> 0.0111...``); ``0`` is all zeros.
* ``xi`` side: the terminating expansion truncated to the window, with
  ``1`` written as all ones.

Decoding is the plain digit sum over the window, so a dyadic ``x > 0``
comes back as ``x - 2**-L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, WindowExhausted

DEFAULT_L = 128


class PhasePoint(NamedTuple):
    xi: Real
    x: Real


@dataclass(frozen=True)
class BitState:
    """Window of ``2L`` binary digits with a cursor in ``[0, 2L]``."""

    bits: bytes
    cursor: int

    def __post_init__(self):
        if len(self.bits) % 2:
            raise ValueError("window length must be even")
        if not 0 <= self.cursor <= len(self.bits):
            raise ValueError("cursor outside the window")
        if any(b > 1 for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def L(self) -> int:
        return len(self.bits) // 2

    @property
    def xi_digits(self) -> tuple[int, ...]:
        """Leading digit first: ``(xi_0, xi_-1, xi_-2, ...)``."""
        return tuple(self.bits[self.cursor - 1 :: -1]) if self.cursor else ()

    @property
    def x_digits(self) -> tuple[int, ...]:
        """``(x_1, x_2, ...)``."""
        return tuple(self.bits[self.cursor :])

    @classmethod
    def from_digits(cls, xi_digits: Sequence[int], x_digits: Sequence[int], L: int | None = None) -> "BitState":
        """Build a state from leading-digit-first sequences, zero padded to ``L`` per side."""
        if L is None:
            L = max(len(xi_digits), len(x_digits), 1)
        if len(xi_digits) > L or len(x_digits) > L:
            raise ValueError("more digits than the window holds")
        left = [0] * (L - len(xi_digits)) + list(reversed(xi_digits))
        right = list(x_digits) + [0] * (L - len(x_digits))
        return cls(bytes(left + right), L)


def _as_fraction(v: Real) -> Fraction:
    if isinstance(v, float) and not math.isfinite(v):
        raise DomainError(f"non-finite coordinate {v!r}")
    return Fraction(v)


def encode(p: PhasePoint | tuple[Real, Real], L: int = DEFAULT_L) -> BitState:
    """Dyadic digits of ``p`` truncated to ``L`` digits per coordinate."""
    if L < 1:
        raise DomainError("L must be positive")
    xi, x = (_as_fraction(v) for v in p)
    if not (0 <= xi <= 1 and 0 <= x <= 1):
        raise DomainError(f"point {tuple(p)!r} outside [0,1]^2")
    scale = 1 << L
    xi_int = scale - 1 if xi == 1 else math.floor(xi * scale)
    x_int = 0 if x == 0 else math.ceil(x * scale) - 1
    left = [(xi_int >> j) & 1 for j in range(L)]  # bits[L-1] is the leading digit
    right = [(x_int >> (L - 1 - j)) & 1 for j in range(L)]
    return BitState(bytes(left + right), L)


def decode_exact(s: BitState) -> tuple[Fraction, Fraction]:
    c, n = s.cursor, len(s.bits)
    xi_int = int("".join(map(str, s.bits[c - 1 :: -1])) or "0", 2) if c else 0
    x_int = int("".join(map(str, s.bits[c:])) or "0", 2)
    return Fraction(xi_int, 1 << c), Fraction(x_int, 1 << (n - c))


def decode(s: BitState) -> PhasePoint:
    xi, x = decode_exact(s)
    return PhasePoint(float(xi), float(x))


def baker_iter(s: BitState, k: int) -> BitState:
    """``B^k`` for any integer ``k`` as a cursor shift."""
    k = int(k)
    if k > s.cursor:
        raise WindowExhausted(f"{k} forward steps but only {s.cursor} xi digits in window")
    if -k > len(s.bits) - s.cursor:
        raise WindowExhausted(f"{-k} backward steps but only {len(s.bits) - s.cursor} x digits in window")
    return BitState(s.bits, s.cursor - k)


def baker(s: BitState) -> BitState:
    """One step of the Baker map: ``(2 xi mod 1, (xi_0 + x) / 2)``."""
    return baker_iter(s, 1)


def baker_formula(xi: Fraction, x: Fraction, k: int, xi_digits: Sequence[int], x_digits: Sequence[int]):
    """Closed form for ``B^k`` in terms of the digit expansions (exact rationals).

    Used as an independent check of the cursor-shift implementation.
    """
    # shifted-out digits are subtracted rather than reduced mod 1, which keeps
    # the non-terminating x convention (2 * 1/2 -> 1, not 0)
    if k >= 0:
        lead = sum(Fraction(xi_digits[k - 1 - j], 1 << (j + 1)) for j in range(k))
        whole = sum(xi_digits[j] << (k - 1 - j) for j in range(k))
        return xi * (1 << k) - whole, lead + x / (1 << k)
    m = -k
    lead = sum(Fraction(x_digits[j], 1 << (m - j)) for j in range(m))
    whole = sum(x_digits[j] << (m - 1 - j) for j in range(m))
    return xi / (1 << m) + lead, x * (1 << m) - whole


@dataclass(frozen=True)
class BitBatch:
    """Many states sharing one cursor position; ``bits`` has shape ``(m, 2L)``."""

    bits: np.ndarray
    cursor: int

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.ndim != 2 or b.shape[1] % 2:
            raise ValueError("bits must have shape (m, 2L)")
        if not 0 <= self.cursor <= b.shape[1]:
            raise ValueError("cursor outside the window")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return self.bits.shape[0]

    def __getitem__(self, i: int) -> BitState:
        return BitState(self.bits[i].tobytes(), self.cursor)

    def __iter__(self) -> Iterable[BitState]:
        return (self[i] for i in range(len(self)))

    @property
    def L(self) -> int:
        return self.bits.shape[1] // 2

    def xi_digits(self, depth: int | None = None) -> np.ndarray:
        depth = self.cursor if depth is None else depth
        if depth > self.cursor:
            raise WindowExhausted(f"need {depth} xi digits, window holds {self.cursor}")
        if depth == 0:
            return np.zeros((len(self), 0), np.uint8)
        return self.bits[:, self.cursor - 1 :: -1][:, :depth]

    def x_digits(self) -> np.ndarray:
        return self.bits[:, self.cursor :]

    def shifted(self, k: int) -> "BitBatch":
        """``B^k`` applied to every state."""
        if k > self.cursor or -k > self.bits.shape[1] - self.cursor:
            raise WindowExhausted(f"cannot shift cursor {self.cursor} by {k} in width {self.bits.shape[1]}")
        return BitBatch(self.bits, self.cursor - k)

    @classmethod
    def from_states(cls, states: Sequence[BitState]) -> "BitBatch":
        cursors = {s.cursor for s in states}
        widths = {len(s.bits) for s in states}
        if len(cursors) != 1 or len(widths) != 1:
            raise ValueError("states must share window width and cursor")
        arr = np.frombuffer(b"".join(s.bits for s in states), dtype=np.uint8).reshape(len(states), -1)
        return cls(arr, cursors.pop())

    @classmethod
    def from_digits(cls, xi_digits: np.ndarray, x_digits: np.ndarray) -> "BitBatch":
        """``xi_digits`` leading digit first, both of shape ``(m, L)``."""
        xi_digits = np.asarray(xi_digits, np.uint8)
        x_digits = np.asarray(x_digits, np.uint8)
        if xi_digits.shape != x_digits.shape:
            raise ValueError("both sides need the same shape")
        return cls(np.concatenate([xi_digits[:, ::-1], x_digits], axis=1), xi_digits.shape[1])

    @classmethod
    def random(cls, gen: np.random.Generator, n: int, L: int = DEFAULT_L) -> "BitBatch":
        from .rng import random_digits

        return cls(random_digits(gen, n, 2 * L), L)


def as_batch(s: BitState | BitBatch) -> tuple[BitBatch, bool]:
    """Return ``(batch, was_single)``."""
    if isinstance(s, BitBatch):
        return s, False
    if isinstance(s, BitState):
        return BitBatch(np.frombuffer(s.bits, dtype=np.uint8)[None, :], s.cursor), True
    raise TypeError(f"expected BitState or BitBatch, got {type(s).__name__}")
