"""Skew products over the Baker map: the attractor map F and the Anosov map G."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .bitdyn import BitBatch, BitState, as_batch, encode
from .errors import DomainError
from .series import (
    DEFAULT_PARAMS,
    DEFAULT_POLICY,
    GAMMA,
    SQRT2,
    TWO_PI,
    CurveParams,
    TruncationPolicy,
    Vec2,
    cis,
    digit_reads,
    drift,
    eval_s,
    require_dynamical,
    s_from_parts,
    to_complex,
    to_pairs,
    xi_prefixes,
)

Mat4 = np.ndarray

S_BOUND = TWO_PI * (1 + SQRT2)


@dataclass(frozen=True)
class FiberState:
    """Base point plus fiber coordinate.

    ``base`` may be a :class:`BitBatch`, in which case ``y`` is an ``(m, 2)`` array.
    """

    base: BitState | BitBatch
    y: Vec2 | np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(np.asarray(self.y, dtype=float))):
            raise DomainError("fiber coordinate must be finite")


def _b2(base: BitState | BitBatch) -> np.ndarray:
    """Second coordinate of the state, as floats."""
    batch, _ = as_batch(base)
    return digit_reads(batch.x_digits(), 1)[:, 0]


def _wrap(z: np.ndarray, base) -> Vec2 | np.ndarray:
    if isinstance(base, BitState):
        z = complex(np.ravel(z)[0])
        return Vec2(z.real, z.imag)
    return to_pairs(z)


def step_f(st: FiberState, params: CurveParams = DEFAULT_PARAMS) -> FiberState:
    """``F(xi, x, y) = (B(xi, x), gamma y + (cos, sin)(2 pi B_2(xi, x)))``."""
    require_dynamical(params)
    base = _shift(st.base)
    y = GAMMA * to_complex(st.y) + cis(_b2(base))
    return FiberState(base, _wrap(y, base))


def step_g(st: FiberState, params: CurveParams = DEFAULT_PARAMS) -> FiberState:
    """``G(xi, x, v) = (B(xi, x), sqrt(2) v + 2 pi (-sin, cos)(2 pi B_2(xi, x)))``."""
    require_dynamical(params)
    base = _shift(st.base)
    v = SQRT2 * to_complex(st.y) + TWO_PI * 1j * cis(_b2(base))
    return FiberState(base, _wrap(v, base))


def _shift(base: BitState | BitBatch, k: int = 1):
    if isinstance(base, BitBatch):
        return base.shifted(k)
    from .bitdyn import baker_iter

    return baker_iter(base, k)


def jacobian_f(s: BitState | BitBatch, params: CurveParams = DEFAULT_PARAMS) -> Mat4:
    """``DF`` at ``(xi, x, y)``; it does not depend on ``y``.  Batches give ``(m, 4, 4)``."""
    require_dynamical(params)
    batch, single = as_batch(s)
    t = TWO_PI * _b2(_shift(batch))
    m = np.zeros((len(batch), 4, 4))
    m[:, 0, 0] = 2.0
    m[:, 1, 1] = 0.5
    m[:, 2, 2] = m[:, 3, 3] = GAMMA
    m[:, 2, 1] = -math.pi * np.sin(t)
    m[:, 3, 1] = math.pi * np.cos(t)
    return m[0] if single else m


def lyapunov_factors(jac: Mat4) -> np.ndarray:
    """Eigenvalues of a lower-triangular Jacobian: its diagonal."""
    if np.any(np.triu(jac, 1)):
        raise ValueError("matrix is not lower triangular")
    return np.diagonal(jac, axis1=-2, axis2=-1).copy()


def stable_vector(s: BitState | BitBatch, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``X(xi, x) = (0, 1, S_1, S_2)``."""
    sv = np.asarray(eval_s(s, params, policy), dtype=float)
    lead = np.broadcast_to([0.0, 1.0], sv.shape)
    return np.concatenate([lead, sv], axis=-1)


def pullback_iterate(
    x_grid,
    k: int,
    y0: Vec2 = Vec2(0.0, 0.0),
    params: CurveParams = DEFAULT_PARAMS,
    policy: TruncationPolicy = DEFAULT_POLICY,
    seed: int = 0,
    L: int | None = None,
) -> list[Vec2]:
    """Fiber value of ``F^k`` started at ``(B^-k(xi, x), y0)`` for each grid point.

    ``xi`` is drawn uniformly from the seeded stream; the result does not depend
    on it, which is the point of the pullback construction.
    """
    require_dynamical(params)
    if k < 1:
        raise DomainError("k must be >= 1")
    xs = [float(x) for x in x_grid]
    if any(not 0 <= x <= 1 for x in xs):
        raise DomainError("grid points must lie in [0, 1]")
    L = L or max(64, k + policy.n_max + 64)
    gen = rng.stream(seed, "pullback")
    xi_digits = rng.random_digits(gen, len(xs), L)
    x_digits = np.array([encode((0, x), L).x_digits for x in xs], dtype=np.uint8)
    batch = BitBatch.from_digits(xi_digits, x_digits).shifted(-k)
    st = FiberState(batch, np.tile(np.asarray(y0, dtype=float), (len(xs), 1)))
    for _ in range(k):
        st = step_f(st, params)
    return [Vec2(*row) for row in np.asarray(st.y)]


@dataclass(frozen=True)
class SBRSummary:
    x: float
    n: int
    seed: int
    mean: Vec2
    variance: Vec2
    std_error: Vec2
    max_radius: float
    hist: np.ndarray
    edges: np.ndarray


HIST_BINS = 200
HIST_RANGE = 16.0


def sbr_sample(x: float, n: int, seed: int, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> SBRSummary:
    """Empirical law of ``S(., x)`` under uniform ``xi`` (the x-marginal of the SBR measure)."""
    require_dynamical(params)
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 <= x <= 1:
        raise DomainError("x must lie in [0, 1]")
    bounds = rng.chunk_bounds(n)
    d = drift(np.float64(x), policy.n_max)
    edges = np.linspace(-HIST_RANGE, HIST_RANGE, HIST_BINS + 1)

    def work(i: int):
        lo, hi = bounds[i]
        xi = rng.random_digits(rng.stream(seed, "sbr", i), hi - lo, policy.n_max)
        v = s_from_parts(cis(xi_prefixes(xi, policy.n_max)), d)
        h, _, _ = np.histogram2d(v.real, v.imag, bins=[edges, edges])
        return v, h.astype(np.int64)

    parts = rng.map_ordered(work, len(bounds), threads)
    v = np.concatenate([p[0] for p in parts])
    hist = rng.sum_ordered([p[1] for p in parts])
    pairs = to_pairs(v)
    var = pairs.var(axis=0, ddof=1) if n > 1 else np.zeros(2)
    return SBRSummary(
        x=float(x),
        n=n,
        seed=seed,
        mean=Vec2(*pairs.mean(axis=0)),
        variance=Vec2(*var),
        std_error=Vec2(*np.sqrt(var / n)),
        max_radius=float(np.abs(v).max()),
        hist=hist,
        edges=edges,
    )
