"""Sliding-window encoder schedule, wire format, and the online decoder."""

import random
from fractions import Fraction

import numpy as np
import pytest

from srlc import rng, simulate
from srlc.block import window_coefficients
from srlc.conv import (RepairPacket, SlidingEncoder, SourcePacket,
                       StreamDecoder, header_row, pack_packet, parse_packet)
from srlc.gf256 import MUL_TABLE
from srlc.params import CodeParams, nonbinary_period


def _params(k=4, d_nonbin=Fraction(1, 2), d_bin=Fraction(1, 2), size=4):
    return CodeParams(k, d_nonbin, d_bin, seed=0, symbol_size=size)


def _payload(sid: int, size: int = 4) -> bytes:
    return bytes((sid * 7 + i) % 256 for i in range(size))


def test_startup_burst_then_regular_cadence():
    # k=4, CR=2/3: the encoder owes one repair per two sources, but waits
    # for a full window, so the first burst lands after the 4th source and
    # contains the heavy repair plus one windowed repair
    enc = SlidingEncoder(_params(), Fraction(2, 3), heavy_period=8)
    out = []
    for sid in range(4):
        pkts = enc.push_source(_payload(sid))
        assert isinstance(pkts[0], SourcePacket) and pkts[0].source_id == sid
        if sid < 3:
            assert len(pkts) == 1
        else:
            out = pkts[1:]
    assert [type(p) for p in out] == [RepairPacket, RepairPacket]
    heavy, windowed = out
    assert heavy.header.is_heavy and heavy.header.repair_id == 0
    assert heavy.header.heavy_end == 3
    want = np.zeros(4, np.uint8)
    for sid in range(4):
        want ^= np.frombuffer(_payload(sid), np.uint8)
    assert np.array_equal(heavy.payload, want)
    assert not windowed.header.is_heavy
    assert windowed.header.repair_id == 1
    assert (windowed.header.window_start, windowed.header.window_end) == (0, 3)


def test_union_window_spans_since_previous_burst():
    enc = SlidingEncoder(_params(), Fraction(2, 3), heavy_period=8)
    repairs = {}
    for sid in range(10):
        for pkt in enc.push_source(_payload(sid)):
            if isinstance(pkt, RepairPacket):
                repairs[pkt.header.repair_id] = pkt.header
    # after the startup burst at S3, two more sources extend the union to
    # S1..S5; each further burst slides the k-sized tail of the stream
    assert (repairs[2].window_start, repairs[2].window_end) == (1, 5)
    assert (repairs[3].window_start, repairs[3].window_end) == (3, 7)
    assert (repairs[4].window_start, repairs[4].window_end) == (5, 9)


def test_fixed_window_mode_uses_stream_tail():
    enc = SlidingEncoder(_params(), Fraction(2, 3), heavy_period=None,
                         fixed_window=True)
    headers = []
    for sid in range(10):
        headers += [p.header for p in enc.push_source(_payload(sid))
                    if isinstance(p, RepairPacket)]
    for hdr in headers:
        if not hdr.is_heavy:
            assert hdr.window_start == max(0, hdr.window_end - 3)


def test_emission_schedule_counts():
    params = _params(k=20, d_nonbin=Fraction(1, 4), size=1)
    enc = SlidingEncoder(params, Fraction(2, 3), heavy_period=5)
    n_heavy = n_windowed = 0
    for sid in range(500):
        for pkt in enc.push_source(b"\x00"):
            if isinstance(pkt, RepairPacket):
                if pkt.header.is_heavy:
                    n_heavy += 1
                else:
                    n_windowed += 1
    # CR=2/3 owes 250 repairs over 500 sources; every 5th slot is heavy
    assert n_heavy + n_windowed == 250
    assert n_heavy == 50
    assert enc.repairs_emitted == 250


def test_heavy_period_validation():
    with pytest.raises(ValueError):
        SlidingEncoder(_params(), Fraction(2, 3), heavy_period=0)
    with pytest.raises(ValueError):
        SlidingEncoder(_params(), Fraction(3, 2))


def test_packet_wire_round_trip():
    enc = SlidingEncoder(_params(), Fraction(2, 3), heavy_period=2)
    packets = []
    for sid in range(8):
        packets += enc.push_source(_payload(sid))
    assert any(isinstance(p, RepairPacket) and p.header.is_heavy
               for p in packets)
    assert any(isinstance(p, RepairPacket) and not p.header.is_heavy
               for p in packets)
    for pkt in packets:
        back = parse_packet(pack_packet(pkt))
        if isinstance(pkt, SourcePacket):
            assert isinstance(back, SourcePacket)
            assert back.source_id == pkt.source_id
            assert np.array_equal(back.payload, pkt.payload)
        else:
            assert back.header == pkt.header
            assert np.array_equal(back.payload, pkt.payload)


def test_parse_packet_errors():
    with pytest.raises(ValueError):
        parse_packet(b"")
    with pytest.raises(ValueError):
        parse_packet(bytes([0, 1, 2]))          # truncated source header
    with pytest.raises(ValueError):
        parse_packet(bytes([1] + [0] * 10))     # truncated repair header
    with pytest.raises(ValueError):
        parse_packet(bytes([9, 0, 0, 0, 0]))    # unknown type byte


def test_header_row_expansion():
    params = _params(k=6, d_nonbin=Fraction(1, 3), d_bin=Fraction(1, 2))
    enc = SlidingEncoder(params, Fraction(2, 3), heavy_period=8)
    repair = None
    for sid in range(8):
        for pkt in enc.push_source(_payload(sid)):
            if isinstance(pkt, RepairPacket) and not pkt.header.is_heavy:
                repair = pkt
    hdr = repair.header
    row = header_row(hdr, params)
    period = nonbinary_period(params.d_nonbin)
    width = hdr.window_end - hdr.window_start + 1
    coeffs = window_coefficients(rng.derive_stream(hdr.seed, hdr.repair_id),
                                 hdr.window_start, width, period,
                                 params.d_bin.numerator,
                                 params.d_bin.denominator)
    want = {j: 1 for j in range(hdr.window_end + 1)}   # heavy prefix
    for off, c in enumerate(coeffs):
        if not c:
            continue
        j = hdr.window_start + off
        merged = want.get(j, 0) ^ int(c)
        if merged:
            want[j] = merged
        else:
            del want[j]
    assert row == want
    # and the payload satisfies the equation it claims
    acc = np.zeros(params.symbol_size, np.uint8)
    for j, c in row.items():
        acc ^= MUL_TABLE[c][np.frombuffer(_payload(j), np.uint8)]
    assert np.array_equal(acc, repair.payload)


def _run_session(tot: int, k: int, p: float, seed: int, heavy_period=4,
                 d_nonbin=Fraction(1, 3), d_bin=Fraction(1, 2)):
    """Encode tot sources, drop packets i.i.d., decode what survives."""
    params = CodeParams(k, d_nonbin, d_bin, seed=0, symbol_size=4)
    enc = SlidingEncoder(params, Fraction(2, 3), heavy_period=heavy_period)
    dec = StreamDecoder(params)
    lose = random.Random(seed)
    originals = {}
    for sid in range(tot):
        originals[sid] = _payload(sid)
        for pkt in enc.push_source(originals[sid]):
            if lose.random() >= p:
                dec.ingest(pack_packet(pkt))
    return params, originals, dec


def test_stream_decoder_lossless_and_light_loss():
    params, originals, dec = _run_session(50, 6, 0.0, seed=1)
    assert dec.missing_below(50) == []
    for tot, k, p, seed in [(60, 8, 0.15, 2), (80, 10, 0.25, 3), (40, 5, 0.3, 4)]:
        params, originals, dec = _run_session(tot, k, p, seed)
        for sid, val in dec.known.items():
            assert bytes(bytearray(np.asarray(val))) == originals[sid], sid


def _recoverable_oracle(lost, received_rows, k_total):
    """Which lost ids a full one-shot elimination pins down uniquely."""
    from srlc.block import gf_eliminate
    if not lost:
        return set()
    pos = {j: i for i, j in enumerate(lost)}
    A = np.zeros((len(received_rows), len(lost)), np.uint8)
    for i, row in enumerate(received_rows):
        for j, c in row.items():
            if j in pos:
                A[i, pos[j]] = c
    B = np.zeros((len(received_rows), 1), np.uint8)
    pivots = gf_eliminate(A, B)
    out = set()
    for r, c in pivots:
        if np.count_nonzero(A[r]) == 1:
            out.add(lost[c])
    return out


def test_stream_decoder_matches_one_shot_elimination():
    for seed in range(8):
        tot, k, p = 70, 9, 0.3
        params = CodeParams(k, Fraction(1, 3), Fraction(1, 2), seed=0,
                            symbol_size=1)
        enc = SlidingEncoder(params, Fraction(2, 3), heavy_period=4)
        dec = StreamDecoder(params, track_payloads=False)
        lose = random.Random(900 + seed)
        lost_sources, rows = [], []
        for sid in range(tot):
            for pkt in enc.push_source(b"\x00"):
                if lose.random() < p:
                    if isinstance(pkt, SourcePacket):
                        lost_sources.append(pkt.source_id)
                    continue
                dec.ingest(pkt)
                if isinstance(pkt, RepairPacket):
                    rows.append(header_row(pkt.header, params))
        oracle = _recoverable_oracle(lost_sources, rows, tot)
        decoded_lost = {sid for sid in lost_sources if sid in dec.known}
        assert decoded_lost == oracle, seed


def test_kernel_session_matches_python_decoder():
    """The compiled Monte-Carlo path and the packet-level path must agree."""
    k, tot, p = 10, 80, 0.25
    params = CodeParams(k, Fraction(1, 5), Fraction(1, 3), seed=0, symbol_size=1)
    cr = Fraction(2, 3)
    heavy_period = 4
    thresh = rng.loss_threshold(p)
    mismatches = []
    for s in range(30):
        session_seed = rng.draw_at(777, s)
        cfg = simulate.ConvTrialConfig(params, tot, code_rate=cr,
                                       heavy_period=heavy_period, loss_rate=p,
                                       session_seed=session_seed)
        kernel_residual = simulate.run_conv_session(cfg)

        loss_seed = rng.draw_at(session_seed, 0)
        enc = SlidingEncoder(params, cr, heavy_period=heavy_period)
        dec = StreamDecoder(params, track_payloads=False)
        emitted = 0
        for sid in range(tot):
            for pkt in enc.push_source(b"\x00"):
                if not rng.is_lost(rng.draw_at(loss_seed, emitted), thresh):
                    dec.ingest(pkt)
                emitted += 1
        python_residual = len(dec.missing_below(tot))
        if python_residual != kernel_residual:
            mismatches.append((s, python_residual, kernel_residual))
    assert not mismatches


def test_decoder_ignores_duplicate_sources():
    params = _params(k=4, size=4)
    dec = StreamDecoder(params)
    pkt = SourcePacket(0, np.frombuffer(_payload(0), np.uint8).copy())
    assert dec.ingest(pkt) == []
    assert dec.ingest(pkt) == []
    assert 0 in dec.known
