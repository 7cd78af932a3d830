"""The curve W, its lacunary power series, the stable direction S, and H.

All four series are sums of unit complex exponentials, so internally the
pair ``(cos, sin)`` is carried as one complex number and ``(-sin, cos)`` as
``1j`` times it.  Public functions return :class:`Vec2` for a single point
and ``(m, 2)`` float arrays for batches.

Notation used below, for a base state ``(xi, x)``:

* ``frac(2**n * x)`` is the second coordinate of ``B**-n`` (read off the x digits);
* ``c_k`` is the number whose binary expansion is the ``k`` most recent xi
  digits, so ``B**k`` has second coordinate ``c_k + x / 2**k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bitdyn import BitBatch, BitState, as_batch
from .errors import DomainError, UnsupportedParameter

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)
GAMMA = 2.0 ** -0.5


class Vec2(NamedTuple):
    v1: float
    v2: float

    def norm(self) -> float:
        return math.hypot(self.v1, self.v2)


@dataclass(frozen=True)
class CurveParams:
    """Amplitude exponent ``alpha``; the frequency base is fixed at 2."""

    alpha: float = 0.5
    gamma: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha={self.alpha} outside (0, 1]")
        object.__setattr__(self, "gamma", 2.0 ** -self.alpha)

    @property
    def is_dynamical(self) -> bool:
        return self.alpha == 0.5


def require_dynamical(params: CurveParams) -> None:
    if not params.is_dynamical:
        raise UnsupportedParameter(f"alpha={params.alpha}: the skew-product identities need alpha = 1/2")


def tail_w(n_max: int, gamma: float = GAMMA) -> float:
    return gamma ** (n_max + 1) / (1.0 - gamma)


def tail_h_neg(k_max: int) -> float:
    return TWO_PI * 2.0 ** (-(k_max + 1) / 2) / (1.0 - GAMMA)


@dataclass(frozen=True)
class TruncationPolicy:
    n_max: int
    k_max: int
    eps: float

    @classmethod
    def from_eps(cls, eps: float = 1e-12, params: CurveParams | None = None) -> "TruncationPolicy":
        if not eps > 0:
            raise DomainError("eps must be positive")
        gamma = (params or CurveParams()).gamma
        n_max = 0
        while tail_w(n_max, gamma) > eps:
            n_max += 1
        k_max = 1
        while tail_h_neg(k_max) > eps:
            k_max += 1
        return cls(n_max, k_max, eps)

    def xi_depth(self) -> int:
        """xi digits needed by S and H."""
        return max(self.n_max, self.k_max)


DEFAULT_PARAMS = CurveParams()
DEFAULT_POLICY = TruncationPolicy.from_eps(1e-12)


# ---------------------------------------------------------------------------
# array kernels


def doubling_reads(x: np.ndarray, n_terms: int) -> np.ndarray:
    """``frac(2**n x)`` for ``n < n_terms``; exact for binary floats."""
    x = np.asarray(x, dtype=float)
    return np.mod(np.ldexp(x[..., None], np.arange(n_terms)), 1.0)


def digit_reads(digits: np.ndarray, n_terms: int) -> np.ndarray:
    """``frac(2**n x)`` for ``n < n_terms`` where ``digits[:, j]`` is ``x_{j+1}``.

    Digits past the end of the array are zero, which is the value the
    truncated window represents.
    """
    m, width = digits.shape
    out = np.zeros((m, n_terms))
    v = np.zeros(m)
    for p in range(width - 1, -1, -1):
        v = 0.5 * (digits[:, p] + v)
        if p < n_terms:
            out[:, p] = v
    return out


def xi_prefixes(xi_digits: np.ndarray, k_terms: int) -> np.ndarray:
    """``c_k`` for ``k = 1..k_terms`` from leading-first xi digits."""
    m = xi_digits.shape[0]
    if xi_digits.shape[1] < k_terms:
        raise ValueError("not enough xi digits")
    out = np.empty((m, k_terms))
    c = np.zeros(m)
    for k in range(k_terms):
        c = 0.5 * (xi_digits[:, k] + c)
        out[:, k] = c
    return out


def cis(t: np.ndarray) -> np.ndarray:
    """``exp(2 pi i t)``."""
    t = TWO_PI * np.asarray(t, dtype=float)
    return np.cos(t) + 1j * np.sin(t)


def drift(x: np.ndarray, k_terms: int) -> np.ndarray:
    """``exp(2 pi i x / 2**k) - 1`` for ``k = 1..k_terms``, without cancellation.

    Only the deepest term uses trigonometry; shallower ones follow from
    ``d_{k-1} = d_k (d_k + 2)``, whose relative error grows by about one
    ulp per step.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (k_terms,), dtype=complex)
    a = math.pi * np.ldexp(x, -k_terms)
    d = -2.0 * np.sin(a) ** 2 + 1j * np.sin(2.0 * a)
    out[..., k_terms - 1] = d
    for k in range(k_terms - 2, -1, -1):
        d = d * (d + 2.0)
        out[..., k] = d
    return out


def w_from_reads(reads: np.ndarray, gamma: float) -> np.ndarray:
    weights = gamma ** np.arange(reads.shape[-1])
    return cis(reads) @ weights


def w_increment_from_reads(reads: np.ndarray, gamma: float) -> np.ndarray:
    """``W(x) - W(0)`` summed as ``cis(t) - 1 = -2 sin(pi t)**2 + i sin(2 pi t)``, free of cancellation."""
    weights = gamma ** np.arange(reads.shape[-1])
    a = math.pi * np.asarray(reads)
    return (-2.0 * np.sin(a) ** 2 + 1j * np.sin(2.0 * a)) @ weights


def w_at_zero(n_terms: int, gamma: float) -> float:
    return float(np.sum(gamma ** np.arange(n_terms)))


def h_neg_weights(k_terms: int) -> np.ndarray:
    return 2.0 ** (np.arange(1, k_terms + 1) / 2)


def h_from_parts(w_minus_w0: np.ndarray, phases: np.ndarray, drifts: np.ndarray) -> np.ndarray:
    """Complex ``H`` from ``W(x) - W(0)``, ``exp(2 pi i c_k)`` and drifts of ``x``."""
    k = phases.shape[-1]
    return w_minus_w0 + np.einsum("...k,...k->...", phases * h_neg_weights(k), drifts)


def s_from_parts(phases: np.ndarray, drifts: np.ndarray) -> np.ndarray:
    """Complex ``S`` from ``exp(2 pi i c_n)`` and drifts of ``x``, ``n = 1..n_max``."""
    n = phases.shape[-1]
    weights = GAMMA ** np.arange(1, n + 1)
    return -TWO_PI * 1j * np.einsum("...k,...k->...", phases * weights, drifts + 1.0)


def integral_from_parts(phases: np.ndarray, drift_a: np.ndarray, drift_b: np.ndarray) -> np.ndarray:
    """Complex ``int_a^b S(xi, z) dz`` term by term from the exact antiderivative."""
    n = phases.shape[-1]
    return -np.einsum("...k,...k->...", phases * h_neg_weights(n), drift_b - drift_a)


def to_pairs(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def to_complex(v) -> np.ndarray | complex:
    a = np.asarray(v, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _out(z: np.ndarray, single: bool):
    if single:
        z = complex(np.ravel(z)[0])
        return Vec2(z.real, z.imag)
    return to_pairs(z)


# ---------------------------------------------------------------------------
# state-level evaluation


def _check_unit(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if not np.all((a >= 0) & (a <= 1)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return a


def state_parts(s: BitState | BitBatch, n_terms: int, k_terms: int):
    """``(batch, single, x_reads, x_value, c_k)`` for a state or batch."""
    batch, single = as_batch(s)
    xi = batch.xi_digits(k_terms)
    reads = digit_reads(batch.x_digits(), max(n_terms, 1))
    return batch, single, reads, reads[:, 0], xi_prefixes(xi, k_terms)


def eval_w(x, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """``W(x) = sum_{n<=n_max} gamma**n (cos, sin)(2 pi 2**n x)``.

    ``x`` may be a float, an array of floats, or a state (its x digits are used).
    """
    n_terms = policy.n_max + 1
    if isinstance(x, (BitState, BitBatch)):
        batch, single = as_batch(x)
        return _out(w_from_reads(digit_reads(batch.x_digits(), n_terms), params.gamma), single)
    a = _check_unit(x, "x")
    z = w_from_reads(doubling_reads(a, n_terms), params.gamma)
    return _out(z, True) if a.ndim == 0 else to_pairs(z)


def eval_w_complex(z, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """Lacunary power series ``sum gamma**n z**(2**n)`` for ``|z| < 1``."""
    zz = np.asarray(z, dtype=complex)
    rho = np.abs(zz)
    if not np.all(rho < 1):
        raise DomainError("|z| must be < 1")
    turns = np.mod(np.angle(zz) / TWO_PI, 1.0)
    n = np.arange(policy.n_max + 1)
    with np.errstate(divide="ignore"):
        # |z|**(2**n) via the logarithm; underflows to 0 long before n_max
        mod = np.exp(np.ldexp(np.log(rho)[..., None], n))
    terms = params.gamma ** n * mod * cis(np.mod(np.ldexp(turns[..., None], n), 1.0))
    total = terms.sum(axis=-1)
    return complex(total) if zz.ndim == 0 else total


def eval_s(s: BitState | BitBatch, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """Stable direction ``S = -2 pi sum_{n>=1} gamma**n (-sin, cos)(2 pi B_2^n)``."""
    require_dynamical(params)
    _, single, _, x, c = state_parts(s, 1, policy.n_max)
    return _out(s_from_parts(cis(c), drift(x, policy.n_max)), single)


def eval_h(s: BitState | BitBatch, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """Bridge function ``H``: the two-sided series referenced to ``x = 0``."""
    require_dynamical(params)
    _, single, reads, x, c = state_parts(s, policy.n_max + 1, policy.k_max)
    w = w_increment_from_reads(reads, GAMMA)
    return _out(h_from_parts(w, cis(c), drift(x, policy.k_max)), single)


def eval_h_at(s: BitState | BitBatch, x, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """``H(xi, x)`` with ``xi`` from the state and ``x`` a real (or one real per state)."""
    require_dynamical(params)
    batch, single = as_batch(s)
    a = _check_unit(x, "x")
    c = xi_prefixes(batch.xi_digits(policy.k_max), policy.k_max)
    w = w_increment_from_reads(doubling_reads(a, policy.n_max + 1), GAMMA)
    z = h_from_parts(w, cis(c), drift(a, policy.k_max))
    return _out(z, single and a.ndim == 0)


def integral_s(s: BitState | BitBatch, a, b, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY):
    """``int_a^b S(xi, z) dz`` in closed form; ``B_2^n(xi, z)`` is affine in ``z``."""
    require_dynamical(params)
    a = _check_unit(a, "a")
    b = _check_unit(b, "b")
    batch, single = as_batch(s)
    c = xi_prefixes(batch.xi_digits(policy.n_max), policy.n_max)
    z = integral_from_parts(cis(c), drift(a, policy.n_max), drift(b, policy.n_max))
    return _out(z, single and a.ndim == 0 and b.ndim == 0)


def h_bound() -> float:
    """Per-component bound on ``|H|``."""
    return 2 * (2 + SQRT2) + TWO_PI * (1 + SQRT2)
