"""Block codec: structured random rows, encoding, and three decoders.

A repair row mixes three ingredients: a sparse binary part (each column set
with probability d_bin), a few non-binary columns (ids divisible by
round(1/d_nonbin), coefficients uniform in 1..255), and the heavy symbol,
the XOR of all k sources, which every repair with id >= 1 accumulates.
Repair 0 is the heavy symbol itself.  Rows regenerate from
(params.seed, repair_id) alone, so a repair packet carries nothing but its
id and payload.

Decoders, weakest to strongest:
  decode_it   peels degree-1 equations of the expanded system only
  decode_sge  peeling plus inactivation, equivalent in reach to decode_ge
  decode_ge   full Gauss-Jordan elimination, the reference
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rng
from .gf256 import INV_TABLE, MUL_TABLE, as_symbol, symbol_mul_add
from .params import CodeParams, nonbinary_period


@dataclass
class ConstraintRow:
    repair_id: int
    binary_cols: list
    nonbinary: dict
    includes_heavy: bool


@dataclass
class DecodeResult:
    success: bool
    recovered: dict = field(default_factory=dict)
    symbols_consumed: int = 0


def nonbinary_columns(k: int, d_nonbin) -> list:
    """Column ids carrying non-binary coefficients: j % round(1/d_nonbin) == 0."""
    period = nonbinary_period(d_nonbin)
    if period == 0:
        return []
    return list(range(0, k, period))


def window_coefficients(row_seed: int, window_start: int, width: int,
                        period: int, d_bin_num: int, d_bin_den: int,
                        mode: int = _kernels.MODE_STRUCTURED) -> np.ndarray:
    """Raw coefficient window for one row, before heavy accumulation."""
    out = np.empty(width, dtype=np.uint8)
    _kernels.fill_row(out, np.uint64(row_seed), window_start, period,
                      d_bin_num, d_bin_den, mode)
    return out


def generate_row(repair_id: int, params: CodeParams) -> ConstraintRow:
    """Deterministic constraint row for one repair id.

    Id 0 is the heavy row (all-ones, no accumulation flag).  Ids >= 1 draw
    their window from the stream keyed by (params.seed, repair_id) and set
    includes_heavy.  A row whose draws all come out zero is forced to keep
    one binary column, so no repair is ever useless by construction.
    """
    if repair_id < 0:
        raise ValueError(f"repair_id must be >= 0, got {repair_id}")
    k = params.k
    if repair_id == 0:
        return ConstraintRow(0, list(range(k)), {}, False)
    period = nonbinary_period(params.d_nonbin)
    row_seed = rng.derive_stream(params.seed, repair_id)
    coeffs = window_coefficients(row_seed, 0, k, period,
                                 params.d_bin.numerator,
                                 params.d_bin.denominator)
    binary_cols = []
    nonbinary = {}
    for j in np.nonzero(coeffs)[0]:
        j = int(j)
        if period > 0 and j % period == 0:
            nonbinary[j] = int(coeffs[j])
        else:
            binary_cols.append(j)
    return ConstraintRow(repair_id, binary_cols, nonbinary, True)


def expand_row(row: ConstraintRow, k: int) -> np.ndarray:
    """Full length-k coefficient vector with the heavy row substituted in.

    Accumulating the heavy symbol adds 1 to every coefficient, so binary
    columns inside the window cancel to zero and everything outside the
    window becomes 1.
    """
    vec = np.zeros(k, dtype=np.uint8)
    if row.binary_cols:
        vec[np.asarray(row.binary_cols, dtype=np.intp)] = 1
    for j, c in row.nonbinary.items():
        vec[j] = c
    if row.includes_heavy:
        vec ^= 1
    return vec


def encode_block(sources, params: CodeParams, n_repairs: int) -> list:
    """Repair symbols 0..n_repairs-1 for the given k source symbols.

    The code is rateless: n_repairs is unbounded and later calls with a
    larger count extend the same sequence.
    """
    k = params.k
    if len(sources) != k:
        raise ValueError(f"expected {k} source symbols, got {len(sources)}")
    S = np.stack([as_symbol(s, params.symbol_size) for s in sources])
    heavy = np.bitwise_xor.reduce(S, axis=0)
    repairs = []
    for rid in range(n_repairs):
        if rid == 0:
            repairs.append(heavy.copy())
            continue
        row = generate_row(rid, params)
        sym = heavy.copy()
        for j in row.binary_cols:
            np.bitwise_xor(sym, S[j], out=sym)
        for j, c in row.nonbinary.items():
            symbol_mul_add(sym, c, S[j])
        repairs.append(sym)
    return repairs


# --- wire format ------------------------------------------------------------

def pack_repair_packet(repair_id: int, payload) -> bytes:
    """Block repair packet: repair_id as big-endian u32, then the payload."""
    if not 0 <= repair_id <= 0xFFFFFFFF:
        raise ValueError(f"repair_id {repair_id} outside u32 range")
    return struct.pack(">I", repair_id) + bytes(bytearray(np.asarray(
        as_symbol(payload), dtype=np.uint8)))


def parse_repair_packet(data: bytes) -> tuple:
    if len(data) < 4:
        raise ValueError("repair packet shorter than its 4-byte header")
    (rid,) = struct.unpack(">I", data[:4])
    return rid, np.frombuffer(data, dtype=np.uint8, offset=4).copy()


# --- decoders ---------------------------------------------------------------

def gf_eliminate(A: np.ndarray, B: np.ndarray) -> list:
    """In-place Gauss-Jordan over GF(2^8); returns [(row, pivot_col), ...].

    A is the coefficient matrix, B the right-hand sides (any width).  After
    the call each pivot row holds a unit vector, so B[row] is directly the
    value of the pivot column's unknown when the system is full rank.
    """
    n, u = A.shape
    pivots = []
    r = 0
    for col in range(u):
        if r == n:
            break
        nz = np.nonzero(A[r:, col])[0]
        if nz.size == 0:
            continue
        pr = r + int(nz[0])
        if pr != r:
            A[[r, pr]] = A[[pr, r]]
            B[[r, pr]] = B[[pr, r]]
        c = int(A[r, col])
        if c != 1:
            inv = int(INV_TABLE[c])
            A[r] = MUL_TABLE[inv][A[r]]
            B[r] = MUL_TABLE[inv][B[r]]
        factors = A[:, col].copy()
        factors[r] = 0
        rows = np.nonzero(factors)[0]
        if rows.size:
            A[rows] ^= MUL_TABLE[factors[rows][:, None], A[r][None, :]]
            B[rows] ^= MUL_TABLE[factors[rows][:, None], B[r][None, :]]
        pivots.append((r, col))
        r += 1
    return pivots


def _prepare(received_sources: dict, params: CodeParams):
    k = params.k
    erased = [j for j in range(k) if j not in received_sources]
    return erased


def decode_ge(received_sources: dict, received_repairs, params: CodeParams) -> DecodeResult:
    """Gauss-Jordan over the expanded equations restricted to erased columns."""
    k, ssize = params.k, params.symbol_size
    consumed = len(received_sources) + len(received_repairs)
    erased = _prepare(received_sources, params)
    if not erased:
        return DecodeResult(True, {}, consumed)
    if not received_repairs:
        return DecodeResult(False, {}, consumed)
    A = np.empty((len(received_repairs), len(erased)), dtype=np.uint8)
    B = np.empty((len(received_repairs), ssize), dtype=np.uint8)
    for i, (rid, sym) in enumerate(received_repairs):
        vec = expand_row(generate_row(rid, params), k)
        b = as_symbol(sym, ssize)
        for j, s in received_sources.items():
            c = int(vec[j])
            if c:
                symbol_mul_add(b, c, as_symbol(s, ssize))
        A[i] = vec[erased]
        B[i] = b
    pivots = gf_eliminate(A, B)
    if len(pivots) < len(erased):
        return DecodeResult(False, {}, consumed)
    recovered = {erased[col]: B[row].copy() for row, col in pivots}
    return DecodeResult(True, recovered, consumed)


def decode_it(received_sources: dict, received_repairs, params: CodeParams) -> DecodeResult:
    """Pure peeling on the expanded system: only degree-1 equations are used.

    Weaker than decode_ge by design; on failure the partial recoveries made
    so far are still returned.
    """
    k, ssize = params.k, params.symbol_size
    consumed = len(received_sources) + len(received_repairs)
    erased = _prepare(received_sources, params)
    if not erased:
        return DecodeResult(True, {}, consumed)
    erased_set = set(erased)
    eqs = []
    by_unknown = {j: set() for j in erased}
    for rid, sym in received_repairs:
        vec = expand_row(generate_row(rid, params), k)
        b = as_symbol(sym, ssize)
        for j, s in received_sources.items():
            c = int(vec[j])
            if c:
                symbol_mul_add(b, c, as_symbol(s, ssize))
        coeffs = {j: int(vec[j]) for j in erased_set if vec[j]}
        eid = len(eqs)
        eqs.append((coeffs, b))
        for j in coeffs:
            by_unknown[j].add(eid)
    recovered = {}
    ready = [eid for eid, (coeffs, _) in enumerate(eqs) if len(coeffs) == 1]
    while ready:
        eid = ready.pop()
        coeffs, b = eqs[eid]
        if len(coeffs) != 1:
            continue
        (j, c), = coeffs.items()
        # detach from the equation's own buffer before substituting anywhere
        val = MUL_TABLE[int(INV_TABLE[c])][b] if c != 1 else b.copy()
        recovered[j] = val
        for other in list(by_unknown[j]):
            ocoeffs, ob = eqs[other]
            symbol_mul_add(ob, ocoeffs.pop(j), val)
            if len(ocoeffs) == 1:
                ready.append(other)
        by_unknown[j].clear()
    return DecodeResult(len(recovered) == len(erased), recovered, consumed)


class _SgeEquation:
    __slots__ = ("active", "inactive", "const")

    def __init__(self, active, inactive, const):
        self.active = active      # unknown id -> coeff, still being peeled
        self.inactive = inactive  # unknown id -> coeff, deferred to dense solve
        self.const = const


def decode_sge(received_sources: dict, received_repairs, params: CodeParams) -> DecodeResult:
    """Structured elimination: peeling with inactivation, then a small dense solve.

    Works on the augmented system where the heavy symbol H is an explicit
    unknown tied to the sources by one extra all-ones equation.  That keeps
    every repair equation sparse and binary over the active unknowns, since
    the non-binary columns are inactivated up front.  Decodability matches
    decode_ge exactly: the augmentation is an invertible substitution, and
    peeling steps are elementary row operations.
    """
    k, ssize = params.k, params.symbol_size
    consumed = len(received_sources) + len(received_repairs)
    erased = _prepare(received_sources, params)
    if not erased:
        return DecodeResult(True, {}, consumed)
    H = k                                   # augmented unknown id
    erased_set = set(erased)
    period = nonbinary_period(params.d_nonbin)

    def known_part(coeff_of):
        b = np.zeros(ssize, dtype=np.uint8)
        for j, s in received_sources.items():
            c = coeff_of(j)
            if c:
                symbol_mul_add(b, c, as_symbol(s, ssize))
        return b

    eqs = []
    # defining equation of the heavy symbol: H + sum of all sources = 0
    eqs.append(_SgeEquation({j: 1 for j in erased} | {H: 1}, {},
                            known_part(lambda j: 1)))
    for rid, sym in received_repairs:
        b = as_symbol(sym, ssize)
        if rid == 0:
            np.bitwise_xor(b, known_part(lambda j: 1), out=b)
            eqs.append(_SgeEquation({j: 1 for j in erased}, {}, b))
            continue
        row = generate_row(rid, params)
        win = {j: 1 for j in row.binary_cols} | dict(row.nonbinary)
        np.bitwise_xor(b, known_part(lambda j: win.get(j, 0)), out=b)
        active = {j: c for j, c in win.items() if j in erased_set}
        active[H] = 1
        eqs.append(_SgeEquation(active, {}, b))

    inactivated = []
    inactive_pos = {}

    def inactivate(u):
        inactive_pos[u] = len(inactivated)
        inactivated.append(u)
        for eq in eqs:
            if u in eq.active:
                eq.inactive[u] = eq.active.pop(u)

    for j in erased:
        if period > 0 and j % period == 0:
            inactivate(j)

    by_unknown = {}
    for eid, eq in enumerate(eqs):
        for u in eq.active:
            by_unknown.setdefault(u, set()).add(eid)

    solved = {}   # unknown -> (const symbol, inactive coeff dict)

    def substitute(eid):
        eq = eqs[eid]
        (u, c), = eq.active.items()
        inv = int(INV_TABLE[c])
        form_const = MUL_TABLE[inv][eq.const] if c != 1 else eq.const.copy()
        form_inact = {i: int(MUL_TABLE[inv, ci]) for i, ci in eq.inactive.items()}
        solved[u] = (form_const, form_inact)
        eq.active.clear()
        eq.inactive.clear()
        eq.const = np.zeros(0, dtype=np.uint8)
        for other in by_unknown.pop(u, ()):
            if other == eid:
                continue
            oeq = eqs[other]
            c2 = oeq.active.pop(u)
            symbol_mul_add(oeq.const, c2, form_const)
            for i, ci in form_inact.items():
                merged = oeq.inactive.get(i, 0) ^ int(MUL_TABLE[c2, ci])
                if merged:
                    oeq.inactive[i] = merged
                else:
                    oeq.inactive.pop(i, None)

    while True:
        progress = True
        while progress:
            progress = False
            for eid, eq in enumerate(eqs):
                if len(eq.active) == 1:
                    substitute(eid)
                    progress = True
        pending = {u: ids for u, ids in by_unknown.items() if ids}
        if not pending:
            break
        # stall: inactivate the unknown touching the most equations,
        # ties to the lowest id (H sorts last)
        u_star = max(pending, key=lambda u: (len(pending[u]), -u))
        del by_unknown[u_star]
        inactivate(u_star)

    n_inact = len(inactivated)
    residual = [eq for eq in eqs if eq.inactive or
                (eq.const.size and eq.const.any())]
    dense_vals = {}
    if n_inact:
        A = np.zeros((len(residual), n_inact), dtype=np.uint8)
        B = np.zeros((len(residual), ssize), dtype=np.uint8)
        for i, eq in enumerate(residual):
            for u, c in eq.inactive.items():
                A[i, inactive_pos[u]] = c
            if eq.const.size:
                B[i] = eq.const
        pivots = gf_eliminate(A, B)
        if len(pivots) < n_inact:
            return DecodeResult(False, {}, consumed)
        for row_i, col in pivots:
            dense_vals[inactivated[col]] = B[row_i].copy()

    recovered = {}
    for u, (form_const, form_inact) in solved.items():
        val = form_const.copy()
        for i, ci in form_inact.items():
            symbol_mul_add(val, ci, dense_vals[i])
        if u != H:
            recovered[u] = val
    for u, val in dense_vals.items():
        if u != H:
            recovered[u] = val
    if set(recovered) != erased_set:
        return DecodeResult(False, {}, consumed)
    return DecodeResult(True, recovered, consumed)
