import math

import numpy as np
import pytest

from weierdim import rng
from weierdim.bitdyn import BitBatch, baker, decode, encode
from weierdim.errors import DomainError
from weierdim.series import DEFAULT_POLICY, GAMMA, SQRT2, TWO_PI, Vec2, eval_s, eval_w
from weierdim.skew import (
    S_BOUND,
    FiberState,
    jacobian_f,
    lyapunov_factors,
    pullback_iterate,
    sbr_sample,
    stable_vector,
    step_f,
    step_g,
)

EPS = DEFAULT_POLICY.eps
S00 = Vec2(0.0, -TWO_PI * (1 + SQRT2))


def near(a, b, tol=1e-12):
    return np.allclose(np.asarray(a, float), np.asarray(b, float), atol=tol, rtol=0)


@pytest.fixture(scope="module")
def states():
    return BitBatch.random(rng.stream(2, "skew-states"), 10_000, 128)


# ---- F -------------------------------------------------------------------------


def test_step_f_graph_point():
    out = step_f(FiberState(encode((0.25, 0.5)), Vec2(SQRT2, 0.0)))
    assert decode(out.base) == (0.5, 0.25)
    assert near(out.y, (1, 1))
    assert near(out.y, eval_w(0.25))


def test_step_f_origin():
    out = step_f(FiberState(encode((0, 0)), Vec2(0.0, 0.0)))
    assert decode(out.base) == (0.0, 0.0)
    assert out.y == Vec2(1.0, 0.0)


def test_step_f_twice_at_origin():
    st = FiberState(encode((0, 0)), Vec2(0.0, 0.0))
    assert near(step_f(step_f(st)).y, (1 + GAMMA, 0), 1e-15)


def test_fiber_state_rejects_nonfinite():
    with pytest.raises(DomainError):
        FiberState(encode((0, 0)), Vec2(math.inf, 0.0))


def test_attractor_identity(states):
    out = step_f(FiberState(states, eval_w(states)))
    assert np.abs(out.y - eval_w(states.shifted(1))).max() < 10 * EPS


# ---- G -------------------------------------------------------------------------


def test_step_g_fixed_point():
    out = step_g(FiberState(encode((0, 0)), S00))
    assert near(out.y, S00)


def test_step_g_from_zero():
    out = step_g(FiberState(encode((0, 0)), Vec2(0.0, 0.0)))
    assert near(out.y, (0, TWO_PI))


def test_step_g_base_fiber_consistency(states):
    out = step_g(FiberState(states, eval_s(states)))
    assert np.linalg.norm(out.y - eval_s(states.shifted(1)), axis=1).max() < 10 * EPS


def test_step_g_single_state():
    s = encode((0.3, 0.7))
    out = step_g(FiberState(s, eval_s(s)))
    assert near(out.y, eval_s(baker(s)), 4 * math.pi * EPS)


# ---- Jacobian and the stable direction --------------------------------------------


def test_jacobian_eigenvalues(states):
    for m in jacobian_f(BitBatch(states.bits[:20], states.cursor)):
        ev = np.sort(np.linalg.eigvals(m).real)
        assert near(ev, [0.5, GAMMA, GAMMA, 2.0], 1e-12)


def test_lyapunov_factors_are_diagonal():
    m = jacobian_f(encode((0.4, 0.1)))
    assert near(lyapunov_factors(m), [2.0, 0.5, GAMMA, GAMMA], 0)


def test_jacobian_origin_entries():
    m = jacobian_f(encode((0, 0)))
    assert m[2, 1] == pytest.approx(0.0, abs=1e-15)
    assert m[3, 1] == pytest.approx(math.pi)


def test_jacobian_quarter_entry():
    m = jacobian_f(encode((0, 0.25)))
    assert m[2, 1] == pytest.approx(-math.pi * math.sin(math.pi / 4), abs=1e-12)
    assert m[2, 1] == pytest.approx(-2.2214415, abs=1e-7)


def test_stable_vector_origin():
    assert near(stable_vector(encode((0, 0))), [0, 1, 0, -TWO_PI * (1 + SQRT2)], 4 * math.pi * EPS)


def test_stable_vector_invariance(states):
    lhs = np.einsum("mij,mj->mi", jacobian_f(states), stable_vector(states))
    rhs = 0.5 * stable_vector(states.shifted(1))
    assert np.abs(lhs - rhs).max() < 10 * EPS


def test_stable_vector_leading_components(states):
    v = stable_vector(BitBatch(states.bits[:100], states.cursor))
    assert np.all(v[:, 0] == 0) and np.all(v[:, 1] == 1)


# ---- pullback ---------------------------------------------------------------------


def test_pullback_one_step():
    (v,) = pullback_iterate([0.25], 1)
    assert abs(complex(*v) - complex(*eval_w(0.25))) <= GAMMA * (2 + SQRT2)


def test_pullback_forty_steps():
    grid = np.linspace(0, 1, 1000)
    got = np.array(pullback_iterate(grid, 40))
    assert np.linalg.norm(got - eval_w(grid), axis=1).max() < 1e-5


@pytest.mark.parametrize("k", [5, 10, 20, 40])
@pytest.mark.parametrize("y0", [Vec2(0.0, 0.0), Vec2(3.0, -4.0)])
def test_pullback_contraction(k, y0):
    grid = np.linspace(0, 1, 257)
    got = np.array(pullback_iterate(grid, k, y0))
    dist = np.linalg.norm(got - eval_w(grid), axis=1).max()
    assert dist <= (2 + SQRT2) * GAMMA**k * (1 + math.hypot(*y0))


def test_pullback_independent_of_xi():
    grid = np.linspace(0, 1, 33)
    a = np.array(pullback_iterate(grid, 60, seed=1))
    b = np.array(pullback_iterate(grid, 60, seed=2))
    assert np.abs(a - b).max() < 1e-8


def test_orbit_on_graph_stays_on_graph():
    batch = BitBatch.random(rng.stream(4, "orbit"), 200, 128).shifted(-30)
    st = FiberState(batch, eval_w(batch))
    for _ in range(30):
        st = step_f(st)
        assert np.abs(st.y - eval_w(st.base)).max() < 10 * EPS


# ---- SBR marginals -----------------------------------------------------------------


@pytest.mark.parametrize("x", [0.0, 0.3, 0.5, 0.9])
def test_sbr_mean_and_disk(x):
    s = sbr_sample(x, 50_000, seed=13)
    assert all(abs(m) <= 3 * e for m, e in zip(s.mean, s.std_error))
    assert s.max_radius <= S_BOUND + EPS


def test_sbr_histogram_reproducible():
    a = sbr_sample(0.4, 40_000, seed=5, threads=1)
    b = sbr_sample(0.4, 40_000, seed=5, threads=3)
    assert np.array_equal(a.hist, b.hist)
    assert a.mean == b.mean and a.variance == b.variance
    assert a.hist.sum() == 40_000


def test_sbr_domain():
    with pytest.raises(DomainError):
        sbr_sample(1.2, 10, 0)
    with pytest.raises(DomainError):
        sbr_sample(0.5, 0, 0)
