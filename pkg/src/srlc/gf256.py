"""Arithmetic over GF(2^8) with reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D).

Addition is bytewise XOR.  Multiplication uses log/exp tables built from the
generator alpha=2.  The polynomial choice is normative: every symbol that
crosses the wire is combined under this exact field, so changing it breaks
interoperability.
"""

import numpy as np

GF_POLY = 0x11D
GF_ORDER = 256

EXP_TABLE = np.zeros(512, dtype=np.uint8)
LOG_TABLE = np.zeros(256, dtype=np.int32)

_x = 1
for _i in range(255):
    EXP_TABLE[_i] = _x
    LOG_TABLE[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= GF_POLY
# doubled so exp lookups never need an explicit mod 255
EXP_TABLE[255:510] = EXP_TABLE[:255]

# full 256x256 product table; row 0 / col 0 stay zero
MUL_TABLE = np.zeros((256, 256), dtype=np.uint8)
_nz = np.arange(1, 256)
MUL_TABLE[1:, 1:] = EXP_TABLE[LOG_TABLE[_nz][:, None] + LOG_TABLE[_nz][None, :]]

INV_TABLE = np.zeros(256, dtype=np.uint8)
INV_TABLE[1:] = EXP_TABLE[255 - LOG_TABLE[_nz]]

del _x, _i, _nz


def gf_mul(a: int, b: int) -> int:
    """Product of two field elements, each in 0..255."""
    return int(MUL_TABLE[a, b])


def gf_inv(a: int) -> int:
    """Multiplicative inverse; raises ZeroDivisionError for 0."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(2^8)")
    return int(INV_TABLE[a])


def gf_div(a: int, b: int) -> int:
    return int(MUL_TABLE[a, gf_inv(b)])


def as_symbol(data, symbol_size: int | None = None) -> np.ndarray:
    """Copy bytes-like or array data into a fresh uint8 symbol array.

    If symbol_size is given, shorter input is zero-padded to that length;
    longer input is rejected.
    """
    arr = np.frombuffer(bytes(data), dtype=np.uint8) if isinstance(
        data, (bytes, bytearray, memoryview)) else np.asarray(data, dtype=np.uint8)
    if symbol_size is None:
        return arr.copy()
    if arr.size > symbol_size:
        raise ValueError(f"data length {arr.size} exceeds symbol size {symbol_size}")
    out = np.zeros(symbol_size, dtype=np.uint8)
    out[:arr.size] = arr
    return out


def zero_symbol(symbol_size: int) -> np.ndarray:
    return np.zeros(symbol_size, dtype=np.uint8)


def _check_lengths(dst: np.ndarray, src: np.ndarray):
    if dst.shape != src.shape:
        raise ValueError(f"symbol length mismatch: {dst.shape} vs {src.shape}")


def symbol_xor_in(dst: np.ndarray, src: np.ndarray) -> np.ndarray:
    """dst ^= src elementwise (field addition). Returns dst."""
    src = np.asarray(src, dtype=np.uint8)
    _check_lengths(dst, src)
    np.bitwise_xor(dst, src, out=dst)
    return dst


def symbol_mul_add(dst: np.ndarray, coeff: int, src: np.ndarray) -> np.ndarray:
    """dst ^= coeff * src elementwise. Returns dst."""
    if not 0 <= coeff <= 255:
        raise ValueError(f"coefficient {coeff} outside 0..255")
    if coeff == 0:
        return dst
    src = np.asarray(src, dtype=np.uint8)
    _check_lengths(dst, src)
    if coeff == 1:
        np.bitwise_xor(dst, src, out=dst)
    else:
        np.bitwise_xor(dst, MUL_TABLE[coeff][src], out=dst)
    return dst
