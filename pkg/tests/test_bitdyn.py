from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from weierdim import rng
from weierdim.bitdyn import (
    BitBatch,
    BitState,
    baker,
    baker_formula,
    baker_iter,
    decode,
    decode_exact,
    encode,
)
from weierdim.errors import DomainError, WindowExhausted


def dyadic(bits: int):
    """Dyadic rationals in [0, 1) with at most ``bits`` binary digits."""
    return st.integers(0, 2**bits - 1).map(lambda j: Fraction(j, 2**bits))


# ---- encode / decode ----------------------------------------------------------


def test_encode_quarter_half():
    s = encode((0.25, 0.5), 4)
    assert s.xi_digits == (0, 1, 0, 0)
    assert s.x_digits == (0, 1, 1, 1)


def test_encode_origin_all_zero():
    for L in (1, 7, 64):
        assert set(encode((0, 0), L).bits) == {0}


def test_encode_three_quarters():
    s = encode((0.75, 0.75), 3)
    assert s.xi_digits == (1, 1, 0)
    assert s.x_digits == (1, 0, 1)


def test_encode_one_is_all_ones():
    s = encode((1, 1), 8)
    assert set(s.bits) == {1}


@pytest.mark.parametrize("p", [(-0.1, 0.2), (0.2, 1.5), (float("nan"), 0.0)])
def test_encode_rejects_outside_square(p):
    with pytest.raises(DomainError):
        encode(p, 8)


def test_decode_zero():
    assert decode(BitState(bytes(8), 4)) == (0.0, 0.0)


def test_decode_single_bits():
    assert decode(BitState(bytes([1, 1]), 1)) == (0.5, 0.5)


@given(dyadic(64), dyadic(64))
def test_decode_encode_roundtrip(xi, x):
    # xi comes back exactly; a dyadic x > 0 comes back as its non-terminating
    # expansion cut to the window, one window ulp low
    dxi, dx = decode_exact(encode((xi, x), 64))
    assert dxi == xi
    assert dx == (x - Fraction(1, 2**64) if x else 0)


@given(dyadic(40), dyadic(40))
def test_decode_encode_roundtrip_floats(xi, x):
    # with a window wider than the float mantissa the offset rounds away
    p = (float(xi), float(x))
    assert decode(encode(p, 128)) == p


@given(dyadic(40), dyadic(40))
def test_window_error_bounded(xi, x):
    L = 48
    dxi, dx = decode_exact(encode((xi, x), L))
    assert 0 <= xi - dxi < Fraction(1, 2**L)
    assert 0 <= x - dx <= Fraction(1, 2**L)


# ---- Baker map -----------------------------------------------------------------


def test_baker_examples():
    assert decode(baker(encode((0.25, 0.5)))) == (0.5, 0.25)
    assert decode(baker(encode((0.75, 0.5)))) == (0.5, 0.75)
    assert decode(baker(encode((0, 0)))) == (0.0, 0.0)


def test_baker_backward_example():
    assert decode(baker_iter(encode((0.5, 0.75)), -1)) == (0.75, 0.5)


def test_baker_two_steps_from_quarter():
    # xi = 1/4 has digits (0, 1, 0, ...); the second step pushes the 1 into x
    s = encode((0.25, 0), 16)
    two = baker_iter(s, 2)
    assert decode(two) == (0.0, 0.5)
    assert two == baker(baker(s))
    assert decode(two).x == float(baker_formula(Fraction(1, 4), Fraction(0), 2, s.xi_digits, s.x_digits)[1])


def test_baker_zero_is_identity():
    s = encode((0.3, 0.6), 16)
    assert baker_iter(s, 0) == s


def test_window_exhausted():
    s = encode((0.3, 0.6), 4)
    with pytest.raises(WindowExhausted):
        baker_iter(s, 5)
    with pytest.raises(WindowExhausted):
        baker_iter(s, -5)


@given(st.binary(min_size=32, max_size=32).map(lambda b: bytes(v & 1 for v in b)), st.integers(0, 32), st.integers(-32, 32))
def test_invertibility_bit_for_bit(bits, cursor, k):
    s = BitState(bits, cursor)
    if not (-(32 - cursor) <= k <= cursor):
        return
    assert baker_iter(baker_iter(s, k), -k) == s


@given(dyadic(20), dyadic(20), st.integers(-8, 8))
def test_conjugacy_exact_on_window(xi, x, k):
    s = encode((xi, x), 32)
    lhs = decode_exact(baker_iter(s, k))
    wxi, wx = decode_exact(s)
    assert lhs == baker_formula(wxi, wx, k, s.xi_digits, s.x_digits)


@given(dyadic(30), dyadic(30))
def test_conjugacy_with_map_formula(xi, x):
    # (2 xi mod 1, (floor(2 xi) + x) / 2) applied to p, up to the window offset of x
    L = 40
    oxi, ox = decode_exact(baker(encode((xi, x), L)))
    assert oxi == (2 * xi) % 1
    assert 0 <= (int(2 * xi) + x) / 2 - ox <= Fraction(1, 2 ** (L + 1))


@given(dyadic(30), dyadic(30).filter(bool))
def test_backward_map_formula(xi, x):
    # ((x_1 + xi) / 2, 2 x - x_1), x_1 the leading digit of the x window
    L = 40
    s = encode((xi, x), L)
    d = s.x_digits[0]
    oxi, ox = decode_exact(baker_iter(s, -1))
    assert oxi == (d + xi) / 2
    assert ox == 2 * x - d - Fraction(1, 2 ** (L - 1))


def test_measure_preservation_chi_square():
    n, bins, counts = 1_000_000, 16, np.zeros((16, 16), dtype=np.int64)
    for i, (lo, hi) in enumerate(rng.chunk_bounds(n, 1 << 17)):
        batch = BitBatch.random(rng.stream(11, "chi2", i), hi - lo, 24).shifted(1)
        weights = 0.5 ** np.arange(1, 24)
        xi = batch.xi_digits(23) @ weights
        x = batch.x_digits()[:, :23] @ weights
        h, _, _ = np.histogram2d(xi, x, bins=bins, range=[[0, 1], [0, 1]])
        counts += h.astype(np.int64)
    p = stats.chisquare(counts.ravel()).pvalue
    assert p > 0.01


# ---- batches -------------------------------------------------------------------


def test_batch_matches_states():
    gen = rng.stream(3, "batch")
    batch = BitBatch.random(gen, 5, 16)
    for i, s in enumerate(batch):
        assert s == batch[i]
        assert baker_iter(s, 3) == batch.shifted(3)[i]
    assert BitBatch.from_states(list(batch)).bits.tobytes() == batch.bits.tobytes()


def test_batch_from_digits_orientation():
    b = BitBatch.from_digits(np.array([[1, 0, 0]]), np.array([[0, 1, 1]]))
    assert b[0].xi_digits == (1, 0, 0)
    assert b[0].x_digits == (0, 1, 1)
    with pytest.raises(WindowExhausted):
        b.xi_digits(4)
