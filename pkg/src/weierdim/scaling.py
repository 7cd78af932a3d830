"""Monte Carlo estimates of the increment sets of H and their scaling in r.

``A_r`` is the set of triples ``(xi, x, y)`` in the unit cube with
``|H(xi, y) - H(xi, x)| <= r`` (Euclidean norm).  All radii of one report
are evaluated on the same sample set, so the estimates are nested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DomainError
from .estimates import MeasureEstimate, fit_loglog
from .series import (
    DEFAULT_POLICY,
    GAMMA,
    TruncationPolicy,
    cis,
    digit_reads,
    drift,
    h_neg_weights,
    w_from_reads,
    xi_prefixes,
)

MIN_COUNT = 100
GUARD_DIGITS = 64
OUTER_BLOCK = 256


def _x_parts(gen: np.random.Generator, m: int, policy: TruncationPolicy):
    """Random x values: ``(x, W(x), drifts, leading digit)``."""
    digits = rng.random_digits(gen, m, policy.n_max + 1 + GUARD_DIGITS)
    reads = digit_reads(digits, policy.n_max + 1)
    x = reads[:, 0]
    return x, w_from_reads(reads, GAMMA), drift(x, policy.k_max), digits[:, 0]


def _xi_weights(gen: np.random.Generator, m: int, policy: TruncationPolicy) -> np.ndarray:
    """``2**(k/2) exp(2 pi i c_k)`` for random xi."""
    xi = rng.random_digits(gen, m, policy.k_max)
    return cis(xi_prefixes(xi, policy.k_max)) * h_neg_weights(policy.k_max)


def increment_samples(n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None):
    """``|H(xi, y) - H(xi, x)|`` for ``n`` uniform triples, and whether x, y share a half of [0, 1].

    The reference terms at ``x = 0`` cancel in the difference and are not formed.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    bounds = rng.chunk_bounds(n)

    def work(i: int):
        lo, hi = bounds[i]
        m = hi - lo
        gen = rng.stream(seed, "ar", i)
        w = _xi_weights(gen, m, policy)
        _, wx, dx, hx = _x_parts(gen, m, policy)
        _, wy, dy, hy = _x_parts(gen, m, policy)
        dh = wy - wx + np.einsum("ij,ij->i", w, dy - dx)
        return np.abs(dh), hx == hy

    parts = rng.map_ordered(work, len(bounds), threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def ar_measure(r: float, n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> MeasureEstimate:
    """Fraction of uniform triples in ``A_r``."""
    if not r > 0:
        raise DomainError("r must be positive")
    dist, _ = increment_samples(n, seed, policy, threads)
    return MeasureEstimate.from_hits(int(np.count_nonzero(dist <= r)), n, seed)


@dataclass
class ScalingReport:
    r_values: list[float]
    estimates: list[MeasureEstimate]
    ratios: list[float] = field(default_factory=list)
    ratio_sigmas: list[float] = field(default_factory=list)
    c_hat: float = math.nan
    C_hat: float = math.nan
    slope: float = math.nan
    slope_stderr: float = math.nan
    starved: list[bool] = field(default_factory=list)
    # measure of A_r restricted to x, y in the same half of [0, 1]
    same_half: list[MeasureEstimate] = field(default_factory=list)

    def ratios_within(self, target: float = 0.5, k: float = 3.0) -> list[bool]:
        return [abs(q - target) <= k * s for q, s in zip(self.ratios, self.ratio_sigmas)]


def _estimates(dist, same, r_values, n, seed):
    est, half, starved = [], [], []
    for r in r_values:
        inside = dist <= r
        hits = int(np.count_nonzero(inside))
        flags = ("starved",) if hits < MIN_COUNT else ()
        est.append(MeasureEstimate.from_hits(hits, n, seed, flags=flags))
        half.append(MeasureEstimate.from_hits(int(np.count_nonzero(inside & same)), n, seed))
        starved.append(hits < MIN_COUNT)
    return est, half, starved


def _fill_constants(rep: ScalingReport) -> ScalingReport:
    vals = [e.value / r**2 for r, e in zip(rep.r_values, rep.estimates)]
    rep.c_hat, rep.C_hat = min(vals), max(vals)
    logs = [math.log(e.value) if e.value > 0 else math.nan for e in rep.estimates]
    levels = list(range(len(rep.r_values)))
    order = np.argsort(rep.r_values)
    fit = fit_loglog(levels, [math.log(rep.r_values[i]) for i in order], [logs[i] for i in order])
    rep.slope, rep.slope_stderr = fit.slope, fit.slope_stderr
    return rep


def scaling_ratio_suite(r0: float, levels: int, n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> ScalingReport:
    """Estimates at ``r0 * gamma**j`` for ``j = 0..levels`` and their consecutive ratios.

    Ratio uncertainties propagate the two binomial standard errors as if independent.
    """
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    if levels < 0:
        raise DomainError("levels must be >= 0")
    r_values = [r0 * GAMMA**j for j in range(levels + 1)]
    dist, same = increment_samples(n, seed, policy, threads)
    est, half, starved = _estimates(dist, same, r_values, n, seed)
    rep = ScalingReport(r_values, est, starved=starved, same_half=half)
    for big, small in zip(est, est[1:]):
        q = small.value / big.value if big.value > 0 else math.nan
        rel = math.hypot(small.std_error / small.value, big.std_error / big.value) if small.value > 0 else math.inf
        rep.ratios.append(q)
        rep.ratio_sigmas.append(q * rel)
    return _fill_constants(rep)


def scaling_constants(r_list, n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY, threads: int | None = None) -> ScalingReport:
    """Empirical ``c``, ``C`` (min and max of value / r**2) and the log-log slope."""
    r_values = [float(r) for r in r_list]
    if not r_values or any(not 0 < r <= 1 for r in r_values):
        raise DomainError("radii must lie in (0, 1]")
    dist, same = increment_samples(n, seed, policy, threads)
    est, half, starved = _estimates(dist, same, r_values, n, seed)
    return _fill_constants(ScalingReport(r_values, est, starved=starved, same_half=half))


@dataclass(frozen=True)
class MarstrandResult:
    eta: float
    r: float
    threshold: float
    estimate: MeasureEstimate
    bound: float
    mean_inner: float
    inner_starved: bool

    @property
    def markov_bound(self) -> float:
        """Markov's inequality applied to the sampled inner fractions."""
        return self.mean_inner / self.threshold

    def holds(self, k: float = 3.0) -> bool:
        return self.estimate.value <= self.bound + k * self.estimate.std_error


def marstrand_check(
    eta: float,
    r: float,
    m_outer: int,
    m_inner: int,
    seed: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    C_hat: float = math.nan,
    threads: int | None = None,
) -> MarstrandResult:
    """Nested estimate of the measure of base points whose inner ball fraction exceeds ``r**(2 - eta)``.

    All outer points share one inner sample of ``y``; ``H(xi, y)`` for a block
    of outer ``xi`` is then one complex matrix product.
    """
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    if not 0 < r < 0.5:
        raise DomainError("r must lie in (0, 1/2)")
    if m_outer < 1 or m_inner < 1:
        raise DomainError("sample counts must be positive")
    threshold = r ** (2 - eta)
    _, wy, dy, _ = _x_parts(rng.stream(seed, "marstrand-inner"), m_inner, policy)
    bounds = rng.chunk_bounds(m_outer, OUTER_BLOCK)

    def work(i: int):
        lo, hi = bounds[i]
        gen = rng.stream(seed, "marstrand-outer", i)
        w = _xi_weights(gen, hi - lo, policy)
        _, wx, dx, _ = _x_parts(gen, hi - lo, policy)
        hx = wx + np.einsum("ij,ij->i", w, dx)
        hy = wy[:, None] + dy @ w.T
        frac = np.count_nonzero(np.abs(hy - hx[None, :]) <= r, axis=0) / m_inner
        return frac

    frac = np.concatenate(rng.map_ordered(work, len(bounds), threads))
    hits = int(np.count_nonzero(frac >= threshold))
    starved = threshold * m_inner < 10
    est = MeasureEstimate.from_hits(hits, m_outer, seed, flags=("inner-starved",) if starved else ())
    return MarstrandResult(eta, r, threshold, est, C_hat * r**eta, float(frac.mean()), starved)
