"""Box counting of the graph in R^3, Hölder exponent estimation, and the Hölder bound."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import rng
from .errors import DomainError, ResourceError
from .estimates import DimensionEstimate, fit_loglog
from .series import (
    DEFAULT_PARAMS,
    CurveParams,
    TruncationPolicy,
    cis,
    doubling_reads,
    eval_w,
)

Curve = Callable[[np.ndarray], np.ndarray]

MAX_POINTS = 1 << 27
BLOCK = 1 << 18
SUBPOINTS = 1 << 22


def _policy(params: CurveParams, policy: TruncationPolicy | None) -> TruncationPolicy:
    return policy or TruncationPolicy.from_eps(1e-12, params)


def vertical_bound(params: CurveParams) -> float:
    """Half-width of the box holding the range: 4 covers ``|W| <= 2 + sqrt 2``."""
    return max(4.0, math.ceil(1.0 / (1.0 - params.gamma)))


def _w_on_dyadic_grid(i: np.ndarray, bits: int, params: CurveParams, n_terms: int) -> np.ndarray:
    """``W(i / 2**bits)``; terms with ``n >= bits`` sit at angle 0 and are summed in closed form."""
    live = min(bits, n_terms)
    x = np.ldexp(i.astype(float), -bits)
    weights = params.gamma ** np.arange(live)
    z = cis(doubling_reads(x, live)) @ weights
    return z + float(np.sum(params.gamma ** np.arange(live, n_terms)))


def _segment_cells(z: np.ndarray, col: np.ndarray, side: int, bound: float, rows: int) -> np.ndarray:
    """Cell keys met by the segments ``z[i] -> z[i+1]``, sampled at most half a cell apart."""
    dz = np.diff(z)
    steps = np.ceil(2.0 * side * np.maximum(np.abs(dz.real), np.abs(dz.imag))).astype(np.int64) + 1
    keys, lo = [], 0
    cum = np.cumsum(steps)
    while lo < steps.size:
        # expand a bounded number of sub-points at a time
        hi = int(np.searchsorted(cum, (cum[lo - 1] if lo else 0) + SUBPOINTS, side="right"))
        hi = max(hi, lo + 1)
        seg = np.repeat(np.arange(lo, hi), steps[lo:hi])
        t = np.arange(seg.size) - np.repeat(cum[lo:hi] - steps[lo:hi] - (cum[lo - 1] if lo else 0), steps[lo:hi])
        p = z[seg] + dz[seg] * (t / steps[seg])
        keys.append(np.unique(_keys(p, col[seg], side, bound, rows)))
        lo = hi
    return np.concatenate(keys)


def _keys(z: np.ndarray, col: np.ndarray, side: int, bound: float, rows: int) -> np.ndarray:
    j1 = np.clip(np.floor((z.real + bound) * side), 0, rows - 1).astype(np.int64)
    j2 = np.clip(np.floor((z.imag + bound) * side), 0, rows - 1).astype(np.int64)
    return (col * rows + j1) * rows + j2


def box_count(
    params: CurveParams = DEFAULT_PARAMS,
    k: int = 4,
    oversample: int = 4,
    policy: TruncationPolicy | None = None,
    curve: Curve | None = None,
    threads: int | None = None,
    method: str = "polyline",
) -> int:
    """Occupied cells of side ``2**-k`` in ``[0,1] x [-b,b]**2`` met by the graph.

    The graph is sampled at ``4**k * oversample`` equispaced ``x``.  With
    ``method="points"`` only the cells holding a sample are counted; that
    count cannot exceed the number of samples, so it saturates at slope 2
    for rougher curves.  ``method="polyline"`` (default) also counts the
    cells crossed by the segment joining consecutive samples, closing the
    curve periodically at ``x = 1``.  ``curve`` replaces ``W`` by any map
    from an x array to an ``(m, 2)`` array.
    """
    if k < 1 or oversample < 1:
        raise DomainError("need k >= 1 and oversample >= 1")
    if method not in ("points", "polyline"):
        raise DomainError("method must be 'points' or 'polyline'")
    n_pts = (1 << (2 * k)) * oversample
    if n_pts > MAX_POINTS:
        raise ResourceError(f"{n_pts} sample points exceed the budget of {MAX_POINTS}")
    policy = _policy(params, policy)
    bound = vertical_bound(params)
    side = 1 << k
    rows = int(math.ceil(2 * bound * side)) + 2
    dyadic = oversample & (oversample - 1) == 0
    bits = 2 * k + oversample.bit_length() - 1
    per_col = n_pts // side
    block = max(per_col, (BLOCK // per_col) * per_col)
    starts = list(range(0, n_pts, block))

    def evaluate(i: np.ndarray) -> np.ndarray:
        if curve is not None:
            pts = np.asarray(curve(i / n_pts), dtype=float)
            return pts[:, 0] + 1j * pts[:, 1]
        if dyadic:
            return _w_on_dyadic_grid(i % n_pts, bits, params, policy.n_max + 1)
        return cis(doubling_reads((i % n_pts) / n_pts, policy.n_max + 1)) @ (params.gamma ** np.arange(policy.n_max + 1))

    def work(b: int) -> int:
        stop = min(starts[b] + block, n_pts)
        i = np.arange(starts[b], stop, dtype=np.int64)
        col = i // per_col
        if method == "points":
            keys = _keys(evaluate(i), col, side, bound, rows)
        else:
            end = np.array([stop], dtype=np.int64)
            tail = curve(np.array([1.0])) if curve is not None and stop == n_pts else None
            z = np.concatenate([evaluate(i), evaluate(end) if tail is None else np.asarray(tail)[:, 0] + 1j * np.asarray(tail)[:, 1]])
            keys = _segment_cells(z, col, side, bound, rows)
        # blocks hold whole columns, so per-block counts add up
        return int(np.unique(keys).size)

    return int(sum(rng.map_ordered(work, len(starts), threads)))


def box_dimension(
    params: CurveParams = DEFAULT_PARAMS,
    k_min: int = 4,
    k_max: int = 11,
    oversample: int = 4,
    policy: TruncationPolicy | None = None,
    curve: Curve | None = None,
    threads: int | None = None,
    method: str = "polyline",
) -> DimensionEstimate:
    """Slope of ``log2 box_count(k)`` against ``k``."""
    if not 2 <= k_min < k_max:
        raise DomainError("need 2 <= k_min < k_max")
    levels = list(range(k_min, k_max + 1))
    counts = [box_count(params, k, oversample, policy, curve, threads, method) for k in levels]
    return fit_loglog(levels, levels, [math.log2(c) for c in counts])


def holder_estimate(
    params: CurveParams = DEFAULT_PARAMS,
    scales=tuple(range(4, 17)),
    n: int = 10_000,
    seed: int = 0,
    policy: TruncationPolicy | None = None,
    curve: Curve | None = None,
) -> DimensionEstimate:
    """Slope of the log max-increment over ``n`` random ``x`` against ``log h``, ``h = 2**-j``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    policy = _policy(params, policy)
    f = curve or (lambda x: eval_w(x, params, policy))
    js = sorted(int(j) for j in scales)
    logs, flags = [], []
    for j in js:
        h = math.ldexp(1.0, -j)
        x = rng.stream(seed, f"holder:{j}").random(n) * (1.0 - h)
        inc = np.hypot(*(np.asarray(f(x + h)) - np.asarray(f(x))).T).max()
        logs.append(math.log(inc) if inc > 0 else -math.inf)
    if not np.all(np.isfinite(logs)):
        flags.append("degenerate")
    if flags:
        return DimensionEstimate(js, [-j * math.log(2) for j in js], logs, math.nan, math.nan, math.nan, tuple(flags))
    return fit_loglog(js, [-j * math.log(2) for j in js], logs)


def holder_bound(alpha: float, d: int) -> float:
    """Upper bound ``1 + (1 - alpha) min(d, 1/alpha)`` on the dimension of an alpha-Hölder graph in R^(1+d)."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    if int(d) != d or d < 1:
        raise DomainError("d must be a positive integer")
    return 1.0 + (1.0 - alpha) * min(d, 1.0 / alpha)
