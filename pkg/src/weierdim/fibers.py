"""Stable fibers through graph points and the measure of their neighborhoods.

The fiber through ``(x, w)`` is ``l(v) = w + int_x^v S(xi, z) dz``.  For the
neighborhood ``V_N`` of the fiber through ``(x, W(x))`` over the dyadic
interval ``I_N(x)`` the lifted Lebesgue measure is computed two ways:

* directly, sampling ``v`` in ``I_N(x)`` and testing ``|W(v) - l(v)| <= K 2**-N``;
* after pulling the base point back ``N`` Baker steps, sampling ``u`` in
  ``[0, 1]`` and testing ``|H(xi_-N, u) - H(xi_-N, x_-N)| <= K gamma**N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .bitdyn import BitBatch, BitState, as_batch
from .errors import DomainError, PrecisionError, WindowExhausted
from .estimates import DimensionEstimate, MeasureEstimate, fit_loglog
from .scaling import GUARD_DIGITS, MIN_COUNT
from .series import (
    DEFAULT_PARAMS,
    DEFAULT_POLICY,
    GAMMA,
    CurveParams,
    TruncationPolicy,
    Vec2,
    cis,
    digit_reads,
    doubling_reads,
    drift,
    eval_w,
    h_neg_weights,
    integral_from_parts,
    integral_s,
    require_dynamical,
    to_complex,
    w_from_reads,
    xi_prefixes,
)


@dataclass(frozen=True)
class FiberNbhd:
    base: BitState
    N: int
    K: float = 1.0

    def __post_init__(self):
        if self.N < 0:
            raise DomainError("N must be >= 0")
        if not self.K > 0:
            raise DomainError("K must be positive")

    @property
    def interval(self) -> tuple[float, float]:
        """``I_N(x) = [j 2**-N, (j+1) 2**-N)`` from the leading x digits."""
        digits = self.base.x_digits
        if len(digits) < self.N:
            raise WindowExhausted("window holds fewer than N x digits")
        j = int("".join(map(str, digits[: self.N])) or "0", 2)
        return math.ldexp(j, -self.N), math.ldexp(j + 1, -self.N)


def _x_value(s: BitState | BitBatch) -> np.ndarray:
    batch, _ = as_batch(s)
    return digit_reads(batch.x_digits(), 1)[:, 0]


def fiber_eval(s: BitState, w: Vec2, v: float, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY) -> Vec2:
    """``l_{(xi, x, w)}(v)`` with ``(xi, x)`` taken from ``s``."""
    if not 0 <= v <= 1:
        raise DomainError("v must lie in [0, 1]")
    x = float(_x_value(s)[0])
    d = integral_s(s, x, v, params, policy)
    return Vec2(w[0] + d.v1, w[1] + d.v2)


def vertical_distance(s: BitState, x: float, y: float, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY) -> Vec2:
    """``l_{(xi, y, W(y))}(y) - l_{(xi, x, W(x))}(y)`` for the ``xi`` of ``s``."""
    require_dynamical(params)
    for v in (x, y):
        if not 0 <= v <= 1:
            raise DomainError("x and y must lie in [0, 1]")
    wx, wy = eval_w(x, params, policy), eval_w(y, params, policy)
    d = integral_s(s, x, y, params, policy)
    return Vec2(wy.v1 - (wx.v1 + d.v1), wy.v2 - (wx.v2 + d.v2))


def _check_floor(radius: float, policy: TruncationPolicy) -> None:
    if not radius > 10 * policy.eps:
        raise PrecisionError(f"radius {radius:g} below the resolution floor {10 * policy.eps:g}")


def _uniform(gen: np.random.Generator, m: int) -> np.ndarray:
    return gen.random(m)


def vn_measure_direct(nb: FiberNbhd, n: int, seed: int, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> MeasureEstimate:
    """``m(V_N)`` by sampling ``v`` uniformly in ``I_N(x)``."""
    require_dynamical(params)
    if n < 1:
        raise DomainError("n must be >= 1")
    radius = nb.K * 2.0**-nb.N
    _check_floor(radius, policy)
    lo_v, _ = nb.interval
    batch, _ = as_batch(nb.base)
    x = _x_value(batch)
    wx = w_from_reads(digit_reads(batch.x_digits(), policy.n_max + 1), GAMMA)[0]
    phases = cis(xi_prefixes(batch.xi_digits(policy.n_max), policy.n_max))[0]
    dx = drift(x, policy.n_max)[0]
    bounds = rng.chunk_bounds(n)

    def work(i: int) -> int:
        a, b = bounds[i]
        u = _uniform(rng.stream(seed, f"vn-direct:{nb.N}", i), b - a)
        v = lo_v + np.ldexp(u, -nb.N)
        fiber = wx + integral_from_parts(phases, dx, drift(v, policy.n_max))
        wv = w_from_reads(doubling_reads(v, policy.n_max + 1), GAMMA)
        return int(np.count_nonzero(np.abs(wv - fiber) <= radius))

    hits = sum(rng.map_ordered(work, len(bounds), threads))
    return MeasureEstimate.from_hits(hits, n, seed, scale=2.0**-nb.N)


def _pulled_back(batch: BitBatch, N: int, policy: TruncationPolicy):
    """``(H(xi_-N, x_-N), 2**(k/2) exp(2 pi i c_k(xi_-N)))`` for each state."""
    if batch.bits.shape[1] - batch.cursor < N:
        raise WindowExhausted(f"window holds fewer than {N} x digits; re-encode with L >= {2 * N + 64}")
    back = batch.shifted(-N)
    weights = cis(xi_prefixes(back.xi_digits(policy.k_max), policy.k_max)) * h_neg_weights(policy.k_max)
    reads = digit_reads(back.x_digits(), policy.n_max + 1)
    h0 = w_from_reads(reads, GAMMA) + np.einsum("ij,ij->i", weights, drift(reads[:, 0], policy.k_max))
    return h0, weights


def scaled_hits(batch: BitBatch, N: int, K: float, n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> np.ndarray:
    """Per-state hit counts of ``|H(xi_-N, u) - H(xi_-N, x_-N)| <= K gamma**N``.

    The ``u`` sample depends only on ``(seed, N)``, so every state of the
    batch sees the same points and all of them are handled by one matrix product.
    """
    radius = K * GAMMA**N
    _check_floor(radius, policy)
    h0, weights = _pulled_back(batch, N, policy)
    bounds = rng.chunk_bounds(n)

    def work(i: int) -> np.ndarray:
        a, b = bounds[i]
        gen = rng.stream(seed, f"vn-scaled:{N}", i)
        digits = rng.random_digits(gen, b - a, policy.n_max + 1 + GUARD_DIGITS)
        reads = digit_reads(digits, policy.n_max + 1)
        hu = w_from_reads(reads, GAMMA)[:, None] + drift(reads[:, 0], policy.k_max) @ weights.T
        return np.count_nonzero(np.abs(hu - h0[None, :]) <= radius, axis=0)

    return rng.sum_ordered(rng.map_ordered(work, len(bounds), threads))


def vn_measure_scaled(nb: FiberNbhd, n: int, seed: int, params: CurveParams = DEFAULT_PARAMS, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> MeasureEstimate:
    """``m(V_N) = 2**-N * lambda{u : |H(xi_-N, u) - H(xi_-N, x_-N)| <= K gamma**N}``."""
    require_dynamical(params)
    if n < 1:
        raise DomainError("n must be >= 1")
    batch, _ = as_batch(nb.base)
    hits = int(scaled_hits(batch, nb.N, nb.K, n, seed, policy, threads)[0])
    return MeasureEstimate.from_hits(hits, n, seed, scale=2.0**-nb.N)


@dataclass(frozen=True)
class LocalDimension:
    """Slopes of ``log m(V_N)`` and of the rescaled term against ``log 2**-N``.

    ``total.slope == 1 + lam.slope`` by construction.
    """

    total: DimensionEstimate
    lam: DimensionEstimate
    measures: list[MeasureEstimate]
    starved: list[int]


def _fit_levels(levels: list[int], hits: list[int], n: int, seed: int) -> LocalDimension:
    xs = [-N * math.log(2) for N in levels]
    measures = [MeasureEstimate.from_hits(h, n, seed, scale=2.0**-N, flags=("starved",) if h < MIN_COUNT else ()) for N, h in zip(levels, hits)]
    lam = [math.log(h / n) if h else -math.inf for h in hits]
    starved = [N for N, h in zip(levels, hits) if h < MIN_COUNT]
    flags = ("starved",) if starved else ()
    lam_fit = fit_loglog(levels, xs, lam, flags)
    total = fit_loglog(levels, xs, [lx + x for lx, x in zip(lam, xs)], flags)
    return LocalDimension(total, lam_fit, measures, starved)


def _check_levels(N_min: int, N_max: int, K: float, policy: TruncationPolicy) -> list[int]:
    if N_min < 2 or N_max <= N_min:
        raise DomainError("need 2 <= N_min < N_max")
    _check_floor(K * 2.0**-N_max, policy)
    return list(range(N_min, N_max + 1))


def local_dimension(
    s: BitState,
    N_min: int,
    N_max: int,
    K: float = 1.0,
    n: int = 100_000,
    seed: int = 0,
    params: CurveParams = DEFAULT_PARAMS,
    policy: TruncationPolicy = DEFAULT_POLICY,
    threads: int | None = None,
) -> LocalDimension:
    """Finite-level local dimension of the lifted measure at the graph point over ``s``."""
    return local_dimension_survey(BitBatch.from_states([s]), N_min, N_max, K, n, seed, params, policy, threads)[0]


def local_dimension_survey(
    batch: BitBatch,
    N_min: int,
    N_max: int,
    K: float = 1.0,
    n: int = 100_000,
    seed: int = 0,
    params: CurveParams = DEFAULT_PARAMS,
    policy: TruncationPolicy = DEFAULT_POLICY,
    threads: int | None = None,
) -> list[LocalDimension]:
    """:func:`local_dimension` for every state in ``batch``."""
    require_dynamical(params)
    levels = _check_levels(N_min, N_max, K, policy)
    counts = np.array([scaled_hits(batch, N, K, n, seed, policy, threads) for N in levels])
    return [_fit_levels(levels, [int(c) for c in counts[:, j]], n, seed) for j in range(len(batch))]


def random_base_points(count: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, N_max: int = 16) -> BitBatch:
    """Uniform base points with room for ``N_max`` backward steps and the series depth."""
    L = max(policy.xi_depth(), N_max + policy.n_max + GUARD_DIGITS)
    return BitBatch.random(rng.stream(seed, "base-points"), count, L)


def mean_slopes(results: list[LocalDimension]) -> tuple[float, float]:
    return (
        float(np.mean([r.total.slope for r in results])),
        float(np.mean([r.lam.slope for r in results])),
    )
