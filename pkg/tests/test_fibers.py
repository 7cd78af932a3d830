import math

import numpy as np
import pytest

from weierdim import rng
from weierdim.bitdyn import BitBatch, BitState, encode
from weierdim.errors import PrecisionError, WindowExhausted
from weierdim.fibers import (
    FiberNbhd,
    fiber_eval,
    local_dimension,
    local_dimension_survey,
    mean_slopes,
    random_base_points,
    vertical_distance,
    vn_measure_direct,
    vn_measure_scaled,
)
from weierdim.series import DEFAULT_POLICY, Vec2, digit_reads, eval_h_at, eval_w

EPS = DEFAULT_POLICY.eps
ORIGIN = encode((0, 0), 256)


def cplx(v):
    return complex(*v)


# ---- fibers ------------------------------------------------------------------------


def test_fiber_starts_at_w():
    s = encode((0.6, 0.375))
    w = Vec2(0.25, -1.5)
    assert fiber_eval(s, w, 0.375) == w


def test_fiber_origin_half():
    w0 = eval_w(0.0)
    got = cplx(fiber_eval(ORIGIN, w0, 0.5)) - cplx(w0)
    assert abs(got - complex(2.334, -6.586)) < 1e-3


def test_fiber_linear_in_w():
    s = encode((0.2, 0.7))
    a = cplx(fiber_eval(s, Vec2(1.0, 2.0), 0.1))
    b = cplx(fiber_eval(s, Vec2(1.5, 1.75), 0.1))
    assert abs((b - a) - complex(0.5, -0.25)) < 4e-15


def test_vertical_distance_zero_on_diagonal():
    assert vertical_distance(encode((0.3, 0.1)), 0.4, 0.4) == Vec2(0.0, 0.0)


def test_vertical_distance_origin_half():
    got = cplx(vertical_distance(ORIGIN, 0.0, 0.5))
    assert abs(got - complex(-4.334, 6.586)) < 1e-3
    assert abs(got - cplx(eval_h_at(ORIGIN, 0.5))) < 10 * EPS


def test_vertical_distance_antisymmetric():
    s = encode((0.8, 0.2))
    assert abs(cplx(vertical_distance(s, 0.1, 0.7)) + cplx(vertical_distance(s, 0.7, 0.1))) < 10 * EPS


def test_fiber_h_identity():
    gen = rng.stream(3, "fiber-h")
    batch = BitBatch.random(gen, 1000, 128)
    xs, ys = gen.random(1000), gen.random(1000)
    worst = 0.0
    for i in range(1000):
        s = batch[i]
        vd = cplx(vertical_distance(s, xs[i], ys[i]))
        dh = cplx(eval_h_at(s, ys[i])) - cplx(eval_h_at(s, xs[i]))
        worst = max(worst, abs(vd - dh))
    assert worst < 10 * EPS


# ---- V_N measures --------------------------------------------------------------------


def test_direct_huge_k_is_full_interval():
    nb = FiberNbhd(encode((0.3, 0.6)), 3, K=1e4)
    assert vn_measure_direct(nb, 5_000, 1).value == 2.0**-3


def test_direct_tiny_k_is_empty():
    nb = FiberNbhd(encode((0.3, 0.6)), 2, K=1e-6)
    assert vn_measure_direct(nb, 20_000, 1).value == 0.0


def test_two_paths_at_origin():
    nb = FiberNbhd(ORIGIN, 6, 1.0)
    a = vn_measure_direct(nb, 100_000, 17)
    b = vn_measure_scaled(nb, 100_000, 17)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)


def test_two_paths_random_neighborhoods():
    batch = random_base_points(6, 31, N_max=8)
    for i, N in enumerate([4, 6, 8, 4, 6, 8]):
        nb = FiberNbhd(batch[i], N)
        a = vn_measure_direct(nb, 100_000, 40 + i)
        b = vn_measure_scaled(nb, 100_000, 40 + i)
        assert abs(a.value - b.value) <= 4 * math.hypot(a.std_error, b.std_error)


def test_scaled_level_zero_is_unit_scale_ball():
    s = random_base_points(1, 5)[0]
    est = vn_measure_scaled(FiberNbhd(s, 0, 1.0), 100_000, 5)
    assert est.scale == 1.0
    # independent estimate from uniform floats and the real-argument evaluator
    gen = rng.stream(99, "level-zero")
    u = gen.random(100_000)
    batch = BitBatch.from_states([s] * 100_000)
    h0 = cplx(eval_h_at(s, float(digit_reads(batch.x_digits()[:1], 1)[0, 0])))
    hu = eval_h_at(batch, u)
    frac = np.mean(np.abs(hu[:, 0] + 1j * hu[:, 1] - h0) <= 1.0)
    sigma = math.hypot(est.std_error, math.sqrt(frac * (1 - frac) / len(u)))
    assert abs(est.value - frac) <= 3 * sigma


def test_scaled_bounded_by_interval_length():
    batch = random_base_points(5, 6, N_max=9)
    for i in range(5):
        for N in (1, 5, 9):
            assert vn_measure_scaled(FiberNbhd(batch[i], N), 20_000, 6).value <= 2.0**-N


def test_scaled_needs_window():
    s = BitState(bytes(120), 110)  # ten x digits
    with pytest.raises(WindowExhausted):
        vn_measure_scaled(FiberNbhd(s, 30), 1000, 0)


def test_precision_floor():
    with pytest.raises(PrecisionError):
        vn_measure_scaled(FiberNbhd(ORIGIN, 60, 1e-2), 1000, 0)


def test_interval_contains_x():
    s = encode((0.1, 0.3))
    lo, hi = FiberNbhd(s, 5).interval
    assert lo <= 0.3 < hi and hi - lo == 2.0**-5


# ---- local dimension ------------------------------------------------------------------


@pytest.fixture(scope="module")
def base_points():
    return random_base_points(100, 42)


def test_decomposition_exact():
    ld = local_dimension(random_base_points(1, 3)[0], 2, 8, n=20_000, seed=3)
    assert ld.total.slope == pytest.approx(1 + ld.lam.slope, abs=1e-12)


def test_starved_levels_flagged():
    ld = local_dimension(random_base_points(1, 4)[0], 2, 14, n=5_000, seed=4)
    assert ld.starved and max(ld.starved) == 14
    assert "starved" in ld.total.flags


def test_survey_matches_single():
    batch = random_base_points(3, 8)
    survey = local_dimension_survey(batch, 2, 6, n=10_000, seed=8)
    single = local_dimension(batch[1], 2, 6, n=10_000, seed=8)
    assert survey[1].total.slope == single.total.slope


def test_k_robustness(base_points):
    slopes = [mean_slopes(local_dimension_survey(base_points, 2, 10, K, 100_000, 42))[0] for K in (0.5, 1.0, 2.0)]
    assert max(slopes) - min(slopes) < 0.05


def test_xi_robustness():
    # 20 random xi at one fixed x
    gen = rng.stream(1, "xi-robust")
    L = random_base_points(1, 0).L
    x = np.repeat(rng.random_digits(gen, 1, L), 20, axis=0)
    batch = BitBatch.from_digits(rng.random_digits(gen, 20, L), x)
    slopes = [r.total.slope for r in local_dimension_survey(batch, 2, 10, 1.0, 100_000, 42)]
    assert max(slopes) - min(slopes) < 0.1
