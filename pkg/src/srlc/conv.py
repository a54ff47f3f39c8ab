"""Sliding-window (convolutional) codec over an unbounded source stream.

The encoder keeps a running heavy symbol h (XOR of every source so far) and
owes floor(n * (1-CR)/CR) repairs after n sources, none before the first k.
Each burst of repairs covers the union of the last k-sized window with
everything since the previous burst; every windowed repair accumulates h,
and repair slots at multiples of heavy_period send h itself.

Signaling is compact: a repair header carries only ids, window bounds and a
seed (defaulting to the repair id), and the decoder regenerates coefficient
rows from that alone.

Packet wire format, all integers big-endian:
  source  0x00 | id u32                                        | payload
  repair  0x01 | repair_id u32 | window_start u32 | window_end u32 | seed u64 | payload
  heavy   0x02 | repair_id u32 | heavy_end u32                 | payload

A windowed repair's heavy accumulation always spans [0, window_end], so its
header needs no separate heavy_end field.
"""

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .block import window_coefficients
from .gf256 import INV_TABLE, MUL_TABLE, as_symbol, symbol_mul_add
from .params import CodeParams, nonbinary_period

PKT_SOURCE = 0
PKT_REPAIR = 1
PKT_HEAVY = 2


@dataclass(frozen=True)
class RepairHeader:
    repair_id: int
    window_start: int
    window_end: int
    is_heavy: bool
    heavy_end: int
    seed: int


@dataclass
class SourcePacket:
    source_id: int
    payload: np.ndarray


@dataclass
class RepairPacket:
    header: RepairHeader
    payload: np.ndarray


def pack_packet(pkt) -> bytes:
    if isinstance(pkt, SourcePacket):
        return struct.pack(">BI", PKT_SOURCE, pkt.source_id) + pkt.payload.tobytes()
    hdr = pkt.header
    if hdr.is_heavy:
        return struct.pack(">BII", PKT_HEAVY, hdr.repair_id,
                           hdr.heavy_end) + pkt.payload.tobytes()
    return struct.pack(">BIIIQ", PKT_REPAIR, hdr.repair_id, hdr.window_start,
                       hdr.window_end, hdr.seed) + pkt.payload.tobytes()


def parse_packet(data: bytes):
    if len(data) < 1:
        raise ValueError("empty packet")
    kind = data[0]
    if kind == PKT_SOURCE:
        if len(data) < 5:
            raise ValueError("source packet shorter than its header")
        (sid,) = struct.unpack(">I", data[1:5])
        return SourcePacket(sid, np.frombuffer(data, np.uint8, offset=5).copy())
    if kind == PKT_REPAIR:
        if len(data) < 21:
            raise ValueError("repair packet shorter than its header")
        rid, ws, we, seed = struct.unpack(">IIIQ", data[1:21])
        hdr = RepairHeader(rid, ws, we, False, we, seed)
        return RepairPacket(hdr, np.frombuffer(data, np.uint8, offset=21).copy())
    if kind == PKT_HEAVY:
        if len(data) < 9:
            raise ValueError("heavy packet shorter than its header")
        rid, he = struct.unpack(">II", data[1:9])
        hdr = RepairHeader(rid, 0, he, True, he, rid)
        return RepairPacket(hdr, np.frombuffer(data, np.uint8, offset=9).copy())
    raise ValueError(f"unknown packet type byte {kind}")


def header_row(hdr: RepairHeader, params: CodeParams) -> dict:
    """Absolute source id -> coefficient for one repair header.

    This is the decoder-side expansion: the window part regenerated from
    (hdr.seed, hdr.repair_id), with the heavy prefix [0, heavy_end] XORed in.
    """
    if hdr.is_heavy:
        return {j: 1 for j in range(hdr.heavy_end + 1)}
    period = nonbinary_period(params.d_nonbin)
    row_seed = rng.derive_stream(hdr.seed, hdr.repair_id)
    width = hdr.window_end - hdr.window_start + 1
    coeffs = window_coefficients(row_seed, hdr.window_start, width, period,
                                 params.d_bin.numerator,
                                 params.d_bin.denominator)
    row = {}
    for j in range(hdr.heavy_end + 1):
        row[j] = 1
    for off in np.nonzero(coeffs)[0]:
        j = hdr.window_start + int(off)
        c = row.get(j, 0) ^ int(coeffs[off])
        if c:
            row[j] = c
        else:
            row.pop(j, None)
    return row


class SlidingEncoder:
    """Streaming encoder; push_source returns the packets due at that step."""

    def __init__(self, params: CodeParams, code_rate, heavy_period: int | None = 8,
                 fixed_window: bool = False):
        code_rate = Fraction(code_rate)
        if not 0 < code_rate <= 1:
            raise ValueError(f"code rate must be in (0, 1], got {code_rate}")
        if heavy_period is not None and heavy_period < 1:
            raise ValueError("heavy_period must be >= 1, or None for startup-only")
        self.params = params
        self.code_rate = code_rate
        self.heavy_period = heavy_period
        self.fixed_window = fixed_window
        self._period = nonbinary_period(params.d_nonbin)
        self._heavy = np.zeros(params.symbol_size, dtype=np.uint8)
        self._sources = {}
        self._next_id = 0
        self._repairs_emitted = 0
        self._boundary = 0

    @property
    def next_source_id(self) -> int:
        return self._next_id

    @property
    def repairs_emitted(self) -> int:
        return self._repairs_emitted

    def heavy_due(self, slot: int) -> bool:
        """Whether the given repair slot carries the heavy symbol."""
        if self.heavy_period is None:
            return slot == 0
        return slot % self.heavy_period == 0

    def push_source(self, data) -> list:
        sym = as_symbol(data, self.params.symbol_size)
        sid = self._next_id
        self._next_id += 1
        self._sources[sid] = sym
        np.bitwise_xor(self._heavy, sym, out=self._heavy)
        out = [SourcePacket(sid, sym.copy())]
        out.extend(self._emit_due())
        return out

    def _owed(self, n_sources: int) -> int:
        cr = self.code_rate
        return n_sources * (cr.denominator - cr.numerator) // cr.numerator

    def _emit_due(self) -> list:
        k = self.params.k
        ns = self._next_id
        if ns < k:
            return []
        owed = self._owed(ns)
        if owed <= self._repairs_emitted:
            return []
        we = ns - 1
        ws = max(0, (we if self.fixed_window else self._boundary) - k + 1)
        pkts = []
        while self._repairs_emitted < owed:
            slot = self._repairs_emitted
            if self.heavy_due(slot):
                hdr = RepairHeader(slot, 0, we, True, we, slot)
                pkts.append(RepairPacket(hdr, self._heavy.copy()))
            else:
                pkts.append(self.make_repair(slot, ws, we))
            self._repairs_emitted += 1
        self._boundary = ns
        low = self._boundary - k + 1
        for sid in [s for s in self._sources if s < low]:
            del self._sources[sid]
        return pkts

    def make_repair(self, repair_id: int, window_start: int,
                    window_end: int) -> RepairPacket:
        """Windowed repair: drawn window combination plus the heavy symbol."""
        seed = repair_id
        row_seed = rng.derive_stream(seed, repair_id)
        width = window_end - window_start + 1
        coeffs = window_coefficients(row_seed, window_start, width,
                                     self._period,
                                     self.params.d_bin.numerator,
                                     self.params.d_bin.denominator)
        sym = self._heavy.copy()
        for off in np.nonzero(coeffs)[0]:
            symbol_mul_add(sym, int(coeffs[off]),
                           self._sources[window_start + int(off)])
        hdr = RepairHeader(repair_id, window_start, window_end, False,
                           window_end, seed)
        return RepairPacket(hdr, sym)


class _Eq:
    __slots__ = ("c", "b")

    def __init__(self, c, b):
        self.c = c   # unknown source id -> coefficient
        self.b = b   # constant symbol, or None in structure-only mode


class StreamDecoder:
    """Online decoder: ingest packets in any order, recover sources as the
    system permits.

    Keeps a reduced system over the currently-unknown source ids.  Memory
    grows with the number of unresolved unknowns and pending equations,
    which an adversarial loss pattern can make large; there is no eviction.
    """

    def __init__(self, params: CodeParams, track_payloads: bool = True):
        self.params = params
        self.track_payloads = track_payloads
        self.known = {}          # source id -> symbol (or True without payloads)
        self._pivot = {}         # pivot unknown -> _Eq
        self._uses = {}          # unknown -> set of pivot ids whose row holds it
        self.equations_held = 0

    # -- linear system maintenance ------------------------------------------

    def _register(self, p: int):
        for u in self._pivot[p].c:
            if u != p:
                self._uses.setdefault(u, set()).add(p)

    def _addmul(self, dst: "_Eq", coeff: int, src: "_Eq", skip: int):
        """dst ^= coeff * src, maintaining the uses index for dst's owner."""
        for u, cu in src.c.items():
            if u == skip:
                continue
            merged = dst.c.get(u, 0) ^ int(MUL_TABLE[coeff, cu])
            if merged:
                dst.c[u] = merged
            else:
                dst.c.pop(u, None)
        if self.track_payloads and src.b is not None:
            symbol_mul_add(dst.b, coeff, src.b)

    def _insert(self, eq: "_Eq", recovered: list):
        # reduce against current pivots
        for u in list(eq.c.keys()):
            if u in eq.c and u in self._pivot:
                c = eq.c.pop(u)
                self._addmul(eq, c, self._pivot[u], skip=u)
        if not eq.c:
            return
        p = min(eq.c)
        c0 = eq.c[p]
        if c0 != 1:
            inv = int(INV_TABLE[c0])
            eq.c = {u: int(MUL_TABLE[inv, cu]) for u, cu in eq.c.items()}
            if self.track_payloads:
                eq.b = MUL_TABLE[inv][eq.b]
        self._pivot[p] = eq
        self.equations_held += 1
        self._register(p)
        # keep reduced form: strip p from every older pivot row
        newly_unit = []
        for q in list(self._uses.get(p, ())):
            if q == p:
                continue
            row = self._pivot.get(q)
            if row is None:
                continue
            c2 = row.c.pop(p, 0)
            if not c2:
                continue
            self._addmul(row, c2, eq, skip=p)
            for u in eq.c:
                if u == p:
                    continue
                if u in row.c:
                    self._uses.setdefault(u, set()).add(q)
                else:
                    s = self._uses.get(u)
                    if s:
                        s.discard(q)
            if len(row.c) == 1:
                newly_unit.append(q)
        self._uses.pop(p, None)
        if len(eq.c) == 1:
            newly_unit.append(p)
        for q in newly_unit:
            self._finalize(q, recovered)

    def _finalize(self, p: int, recovered: list):
        """Pivot row reduced to a unit: its unknown is now a known value."""
        eq = self._pivot.pop(p, None)
        if eq is None:
            return
        self.equations_held -= 1
        value = eq.b if self.track_payloads else True
        self.known[p] = value
        recovered.append(p)
        self._propagate(p, value, recovered)

    def _propagate(self, sid: int, value, recovered: list):
        """Substitute newly known sources into rows, iteratively cascading."""
        queue = [(sid, value)]
        while queue:
            s, v = queue.pop()
            for q in list(self._uses.pop(s, ())):
                row = self._pivot.get(q)
                if row is None:
                    continue
                c = row.c.pop(s, 0)
                if c and self.track_payloads:
                    symbol_mul_add(row.b, c, v)
                if len(row.c) == 1:
                    eq2 = self._pivot.pop(q)
                    self.equations_held -= 1
                    val2 = eq2.b if self.track_payloads else True
                    self.known[q] = val2
                    recovered.append(q)
                    queue.append((q, val2))

    # -- packet handling ------------------------------------------------------

    def ingest(self, packet) -> list:
        """Feed one packet (bytes or parsed); returns newly decoded source ids.

        The list covers sources recovered by elimination; a source id that
        simply arrived in a source packet is not reported.
        """
        if isinstance(packet, (bytes, bytearray, memoryview)):
            packet = parse_packet(bytes(packet))
        recovered = []
        if isinstance(packet, SourcePacket):
            sid = packet.source_id
            if sid in self.known:
                return []
            value = as_symbol(packet.payload, self.params.symbol_size) \
                if self.track_payloads else True
            self.known[sid] = value
            pivot_row = self._pivot.pop(sid, None)
            if pivot_row is not None:
                # its row minus sid still carries information: re-insert it
                self.equations_held -= 1
                pivot_row.c.pop(sid)
                for u in pivot_row.c:
                    s = self._uses.get(u)
                    if s:
                        s.discard(sid)
                if self.track_payloads:
                    symbol_mul_add(pivot_row.b, 1, value)
                if pivot_row.c:
                    self._insert(pivot_row, recovered)
            self._propagate(sid, value, recovered)
            return recovered
        hdr = packet.header
        full = header_row(hdr, self.params)
        b = as_symbol(packet.payload, self.params.symbol_size) \
            if self.track_payloads else None
        coeffs = {}
        for j, c in full.items():
            val = self.known.get(j)
            if val is None:
                coeffs[j] = c
            elif self.track_payloads:
                symbol_mul_add(b, c, val)
        eq = _Eq(coeffs, b)
        if eq.c:
            self._insert(eq, recovered)
        return recovered

    # -- status ---------------------------------------------------------------

    def missing_below(self, horizon: int) -> list:
        """Source ids < horizon that are still unrecovered."""
        return [j for j in range(horizon) if j not in self.known]
