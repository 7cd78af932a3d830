"""Result records for Monte Carlo measures and log-log regressions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class MeasureEstimate:
    """Binomial estimate of a Lebesgue measure, possibly rescaled by ``scale``.

    ``value = scale * hits / n_samples``; the standard error is the binomial
    one for the unscaled fraction, rescaled the same way.
    """

    value: float
    std_error: float
    n_samples: int
    seed: int
    hits: int = 0
    scale: float = 1.0
    flags: tuple[str, ...] = ()

    @classmethod
    def from_hits(cls, hits: int, n: int, seed: int, scale: float = 1.0, flags: tuple[str, ...] = ()) -> "MeasureEstimate":
        if n < 1:
            raise ValueError("need at least one sample")
        p = hits / n
        return cls(scale * p, scale * math.sqrt(p * (1 - p) / n), n, seed, int(hits), scale, tuple(flags))

    @property
    def fraction(self) -> float:
        return self.hits / self.n_samples


@dataclass(frozen=True)
class DimensionEstimate:
    """Least-squares fit of ``log_counts`` against ``log_scales``.

    ``levels`` index the scales (dyadic level ``k`` or ``N``); for box counts
    ``log_scales`` is ``k`` and ``log_counts`` is ``log2 N(2**-k)``.
    """

    levels: list
    log_scales: list
    log_counts: list
    slope: float
    intercept: float
    slope_stderr: float
    flags: tuple[str, ...] = field(default=())

    @property
    def degenerate(self) -> bool:
        return "degenerate" in self.flags


def fit_loglog(levels, log_scales, log_counts, flags=()) -> DimensionEstimate:
    xs = np.asarray(log_scales, dtype=float)
    ys = np.asarray(log_counts, dtype=float)
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    if list(levels) != sorted(set(levels)):
        raise ValueError("levels must be strictly increasing")
    ok = np.isfinite(ys)
    flags = tuple(flags)
    if ok.sum() < 2 or np.ptp(xs[ok]) == 0:
        return DimensionEstimate(list(levels), xs.tolist(), ys.tolist(), math.nan, math.nan, math.nan, flags + ("degenerate",))
    if ok.sum() < 3:
        slope = float(np.polyfit(xs[ok], ys[ok], 1)[0])
        icpt = float(np.mean(ys[ok]) - slope * np.mean(xs[ok]))
        return DimensionEstimate(list(levels), xs.tolist(), ys.tolist(), slope, icpt, math.nan, flags)
    fit = stats.linregress(xs[ok], ys[ok])
    return DimensionEstimate(list(levels), xs.tolist(), ys.tolist(), float(fit.slope), float(fit.intercept), float(fit.stderr), flags)
