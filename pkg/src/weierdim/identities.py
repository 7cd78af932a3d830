"""Residuals of the exact identities tying W, S, H, F, G and B together.

Each check evaluates both sides on a batch of random states and returns the
largest Euclidean residual.  ``h_cocycle`` is the pointwise scaling law of H;
it only holds on states whose leading xi digit is 0 (otherwise the two sides
differ by ``H(B(xi, x)) - gamma H(xi, x) = H(xi', 1/2)``, a constant in x).
``h_increment_cocycle`` is the same law for differences in x, which holds
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .bitdyn import BitBatch
from .series import (
    DEFAULT_POLICY,
    GAMMA,
    SQRT2,
    TWO_PI,
    TruncationPolicy,
    cis,
    digit_reads,
    eval_h,
    eval_h_at,
    eval_s,
    eval_w,
    integral_s,
    to_complex,
)
from .skew import jacobian_f, stable_vector

CHECKS = ("attractor", "s_cocycle", "h_cocycle", "h_increment_cocycle", "bridge", "stable_vector")


@dataclass(frozen=True)
class Residual:
    name: str
    max_residual: float
    worst_index: int
    # fraction of states whose residual exceeds the tolerance
    failing_fraction: float

    def passes(self, tol: float) -> bool:
        return self.max_residual < tol


def random_states(n: int, seed: int, policy: TruncationPolicy = DEFAULT_POLICY) -> tuple[BitBatch, BitBatch]:
    """Two batches sharing xi digits but with independent x digits."""
    L = policy.xi_depth() + 64
    gen = rng.stream(seed, "identities")
    xi = rng.random_digits(gen, n, L)
    xs = rng.random_digits(gen, n, L)
    ys = rng.random_digits(gen, n, L)
    return BitBatch.from_digits(xi, xs), BitBatch.from_digits(xi, ys)


def _x(batch: BitBatch) -> np.ndarray:
    return digit_reads(batch.x_digits(), 1)[:, 0]


def _c(v) -> np.ndarray:
    return to_complex(np.asarray(v))


def residual_arrays(s: BitBatch, t: BitBatch, policy: TruncationPolicy = DEFAULT_POLICY) -> dict[str, np.ndarray]:
    bs, bt = s.shifted(1), t.shifted(1)
    b2 = _x(bs)
    out = {}
    out["attractor"] = _c(eval_w(bs, policy=policy)) - (GAMMA * _c(eval_w(s, policy=policy)) + cis(b2))
    out["s_cocycle"] = _c(eval_s(bs, policy=policy)) - (SQRT2 * _c(eval_s(s, policy=policy)) + TWO_PI * 1j * cis(b2))
    hs, ht = _c(eval_h(s, policy=policy)), _c(eval_h(t, policy=policy))
    hbs, hbt = _c(eval_h(bs, policy=policy)), _c(eval_h(bt, policy=policy))
    out["h_cocycle"] = hbs - GAMMA * hs
    out["h_increment_cocycle"] = (hbt - hbs) - GAMMA * (ht - hs)
    # the bridge compares real arguments, so every term uses the same rounded x and y
    x, y = _x(s), _x(t)
    dh = _c(eval_h_at(s, y, policy=policy)) - _c(eval_h_at(s, x, policy=policy))
    dw = _c(eval_w(y, policy=policy)) - _c(eval_w(x, policy=policy))
    out["bridge"] = dh - (dw - _c(integral_s(s, x, y, policy=policy)))
    lhs = np.einsum("mij,mj->mi", jacobian_f(s), stable_vector(s, policy=policy))
    out["stable_vector"] = lhs - 0.5 * stable_vector(bs, policy=policy)
    return out


def identity_residuals(n: int = 10_000, seed: int = 0, tol: float = 1e-8, policy: TruncationPolicy = DEFAULT_POLICY) -> list[Residual]:
    s, t = random_states(n, seed, policy)
    res = []
    for name, r in residual_arrays(s, t, policy).items():
        mag = np.abs(r) if r.ndim == 1 else np.linalg.norm(r, axis=-1)
        res.append(Residual(name, float(mag.max()), int(mag.argmax()), float(np.mean(mag >= tol))))
    return res
