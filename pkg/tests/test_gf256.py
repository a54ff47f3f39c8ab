"""Field arithmetic checked against an independent shift-and-reduce oracle."""

import numpy as np
import pytest

from srlc import gf256


def slow_mul(a: int, b: int) -> int:
    """Carry-less multiply then reduce by 0x11D, no tables involved."""
    acc = 0
    x = a
    for bit in range(8):
        if (b >> bit) & 1:
            acc ^= x << bit
    for bit in range(15, 7, -1):
        if (acc >> bit) & 1:
            acc ^= gf256.GF_POLY << (bit - 8)
    return acc


def test_mul_matches_oracle_all_pairs():
    a = np.arange(256, dtype=np.uint16)
    # vectorized oracle over the full 256x256 grid
    acc = np.zeros((256, 256), dtype=np.uint32)
    for bit in range(8):
        mask = ((a >> bit) & 1).astype(bool)
        acc[:, mask] ^= (a.astype(np.uint32) << bit)[:, None]
    for bit in range(15, 7, -1):
        hit = ((acc >> bit) & 1).astype(bool)
        acc[hit] ^= gf256.GF_POLY << (bit - 8)
    assert np.array_equal(acc.astype(np.uint8), gf256.MUL_TABLE)


def test_mul_spot_values():
    assert gf256.gf_mul(0, 123) == 0
    assert gf256.gf_mul(1, 123) == 123
    assert gf256.gf_mul(2, 0x80) == 0x1D          # wraps into the polynomial
    assert gf256.gf_mul(7, 11) == slow_mul(7, 11)


def test_all_inverses():
    for a in range(1, 256):
        inv = gf256.gf_inv(a)
        assert gf256.gf_mul(a, inv) == 1, a


def test_zero_has_no_inverse():
    with pytest.raises(ZeroDivisionError):
        gf256.gf_inv(0)


def test_div_consistent_with_mul():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = int(rng.integers(0, 256))
        b = int(rng.integers(1, 256))
        assert gf256.gf_mul(gf256.gf_div(a, b), b) == a


def test_symbol_mul_add_distributes():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 256, 64, dtype=np.uint8)
    y = rng.integers(0, 256, 64, dtype=np.uint8)
    c = 177
    lhs = np.zeros(64, np.uint8)
    gf256.symbol_mul_add(lhs, c, x ^ y)
    rhs = np.zeros(64, np.uint8)
    gf256.symbol_mul_add(rhs, c, x)
    gf256.symbol_mul_add(rhs, c, y)
    assert np.array_equal(lhs, rhs)


def test_symbol_xor_in_is_involution():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 256, 32, dtype=np.uint8)
    y = rng.integers(0, 256, 32, dtype=np.uint8)
    z = x.copy()
    gf256.symbol_xor_in(z, y)
    gf256.symbol_xor_in(z, y)
    assert np.array_equal(z, x)


def test_symbol_length_mismatch_rejected():
    with pytest.raises(ValueError):
        gf256.symbol_mul_add(np.zeros(4, np.uint8), 2, np.zeros(5, np.uint8))


def test_as_symbol_pads_and_rejects():
    out = gf256.as_symbol(b"ab", 4)
    assert out.tolist() == [97, 98, 0, 0]
    with pytest.raises(ValueError):
        gf256.as_symbol(b"abcde", 4)
