"""Deterministic pseudo-random draws shared by encoder and decoder.

This is part of the wire contract.  Both ends regenerate identical
coefficient rows from compact seeds, so the generator must be reproduced
bit-for-bit:

    draw_at(seed, i) = mix(seed + (i+1) * GOLDEN   mod 2^64)

where mix is the splitmix64 finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

and GOLDEN = 0x9E3779B97F4A7C15.  Being a pure function of (seed, index) it
needs no mutable state, which keeps row generation random-access and
identical across implementations.

Mapping draws to values (also normative where rows are derived):
    nonzero field coefficient:  1 + (z mod 255)
    uniform byte:               z mod 256
    Bernoulli(num/den):         (z mod den) < num
    uniform index below n:      z mod n

`derive_stream(seed, sid)` is the same function as `draw_at`; the alias
marks places where the result seeds a child stream rather than a value.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on one 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def draw_at(seed: int, index: int) -> int:
    """index-th 64-bit draw of the stream rooted at seed."""
    return mix64((seed + (index + 1) * GOLDEN) & MASK64)


def derive_stream(seed: int, stream_id: int) -> int:
    """Seed for a child stream; identical map to draw_at by design."""
    return draw_at(seed, stream_id)


def coeff_nonzero(z: int) -> int:
    """Uniform field coefficient in 1..255."""
    return 1 + (z % 255)


def uniform_byte(z: int) -> int:
    return z % 256


def bernoulli(z: int, num: int, den: int) -> bool:
    """True with probability num/den."""
    return (z % den) < num


def pick_below(z: int, n: int) -> int:
    return z % n


def loss_threshold(p: float) -> int:
    """Threshold for the loss test: lose iff (draw >> 11) < threshold.

    Compares the top 53 bits of a draw against floor(p * 2^53), giving an
    i.i.d. Bernoulli(p) loss process that is reproducible across runs.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"loss rate {p} outside [0, 1]")
    return int(p * (1 << 53))


def is_lost(z: int, threshold: int) -> bool:
    return (z >> 11) < threshold


def shuffled_indices(n: int, seed: int) -> list:
    """Fisher-Yates permutation of range(n) driven by draw_at(seed, ctr).

    Draw ctr starts at 0 and increments once per swap, i from n-1 down to 1.
    """
    order = list(range(n))
    ctr = 0
    for i in range(n - 1, 0, -1):
        j = pick_below(draw_at(seed, ctr), i + 1)
        ctr += 1
        order[i], order[j] = order[j], order[i]
    return order
