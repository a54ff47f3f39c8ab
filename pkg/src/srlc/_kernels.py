"""Compiled hot paths: row sampling, incremental rank tracking, trial loops.

Everything here mirrors the documented wire/simulation contracts exactly;
the python reference in rng.py exists so tests can cross-check the two.
Rank tracking keeps a row-echelon basis indexed by pivot column.  Unit rows
(received source symbols) claim free pivots in O(1), dense repair rows are
reduced by leading-column cascade over shrinking suffixes.
"""

import numpy as np
from numba import njit

from .gf256 import INV_TABLE, MUL_TABLE

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_U0 = np.uint64(0)


@njit(cache=True, inline="always")
def _mix(z):
    z = np.uint64(z)
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


@njit(cache=True, inline="always")
def draw_at(seed, index):
    return _mix(np.uint64(seed) + (np.uint64(index) + _ONE) * _GOLDEN)


# generator modes
MODE_STRUCTURED = 0   # sparse binary + periodic non-binary columns + empty-row guard
MODE_GF256 = 1        # every coefficient uniform in 0..255, no guard
MODE_BINARY_RAW = 2   # plain Bernoulli(d_bin) rows, no guard; pass period=0


@njit(cache=True)
def fill_row(out, row_seed, window_start, period, num, den, mode):
    """Window coefficients for one repair row, before any heavy accumulation.

    One draw per column at index (column - window_start); the guard draw,
    used only when a structured row would come out empty, sits at index
    width.  Returns the number of nonzero coefficients written.
    """
    width = out.shape[0]
    nden = np.uint64(den)
    nnum = np.uint64(num)
    nz = 0
    n_bin = 0
    for off in range(width):
        z = draw_at(row_seed, off)
        c = np.uint8(0)
        if mode == MODE_GF256:
            c = np.uint8(z % np.uint64(256))
        else:
            j = window_start + off
            if period > 0 and j % period == 0:
                c = np.uint8(_ONE + z % np.uint64(255))
            else:
                n_bin += 1
                if (z % nden) < nnum:
                    c = np.uint8(1)
        out[off] = c
        if c != 0:
            nz += 1
    if mode == MODE_STRUCTURED and nz == 0 and n_bin > 0:
        pick = int(draw_at(row_seed, width) % np.uint64(n_bin))
        cnt = 0
        for off in range(width):
            j = window_start + off
            if period > 0 and j % period == 0:
                continue
            if cnt == pick:
                out[off] = 1
                nz = 1
                break
            cnt += 1
    return nz


@njit(cache=True)
def insert_row(P, has_pivot, row):
    """Reduce row against the echelon basis; absorb it if independent.

    P[j] holds the basis row whose leading 1 sits at column j; entries left
    of the pivot are never read.  Returns True when the rank grew.
    """
    k = row.shape[0]
    j = 0
    while j < k:
        while j < k and row[j] == 0:
            j += 1
        if j == k:
            return False
        c = row[j]
        if not has_pivot[j]:
            if c != 1:
                mrow = MUL_TABLE[INV_TABLE[c]]
                for t in range(j, k):
                    row[t] = mrow[row[t]]
            for t in range(j, k):
                P[j, t] = row[t]
            has_pivot[j] = True
            return True
        if c == 1:
            for t in range(j, k):
                row[t] ^= P[j, t]
        else:
            mrow = MUL_TABLE[c]
            for t in range(j, k):
                row[t] ^= mrow[P[j, t]]
        j += 1
    return False


@njit(cache=True)
def _block_needed(k, n_repairs, has_heavy, mode, period, num, den,
                  code_seed, shuffle_seed, P, has_pivot, row, order):
    """Symbols consumed until the block decodes, or -1 if never."""
    for j in range(k):
        has_pivot[j] = False
    total = k + n_repairs
    for i in range(total):
        order[i] = i
    ctr = 0
    for i in range(total - 1, 0, -1):
        z = draw_at(shuffle_seed, ctr)
        ctr += 1
        jj = int(z % np.uint64(i + 1))
        tmp = order[i]
        order[i] = order[jj]
        order[jj] = tmp
    rank = 0
    for idx in range(total):
        s = order[idx]
        grew = False
        if s < k:
            if not has_pivot[s]:
                for t in range(s, k):
                    P[s, t] = 0
                P[s, s] = 1
                has_pivot[s] = True
                grew = True
            else:
                for t in range(k):
                    row[t] = 0
                row[s] = 1
                grew = insert_row(P, has_pivot, row)
        else:
            rid = s - k
            if has_heavy and rid == 0:
                for t in range(k):
                    row[t] = 1
            else:
                fill_row(row, draw_at(code_seed, rid), 0, period, num, den, mode)
                if has_heavy:
                    for t in range(k):
                        row[t] ^= 1
            grew = insert_row(P, has_pivot, row)
        if grew:
            rank += 1
            if rank == k:
                return idx + 1
    return -1


@njit(cache=True)
def block_needed_single(k, n_repairs, has_heavy, mode, period, num, den,
                        code_seed, shuffle_seed):
    P = np.empty((k, k), np.uint8)
    has_pivot = np.zeros(k, np.bool_)
    row = np.empty(k, np.uint8)
    order = np.empty(k + n_repairs, np.int32)
    return _block_needed(k, n_repairs, has_heavy, mode, period, num, den,
                         code_seed, shuffle_seed, P, has_pivot, row, order)


@njit(cache=True)
def block_needed_single_gf2(k, n_repairs, num, den, code_seed, shuffle_seed):
    nw = (k + 63) >> 6
    P2 = np.empty((k, nw), np.uint64)
    has_pivot = np.zeros(k, np.bool_)
    wrow = np.empty(nw, np.uint64)
    order = np.empty(k + n_repairs, np.int32)
    return _block_needed_gf2(k, n_repairs, num, den, code_seed, shuffle_seed,
                             P2, has_pivot, wrow, order)


@njit(cache=True)
def block_needed_batch(k, n_repairs, has_heavy, mode, period, num, den,
                       base_seed, n_trials):
    """Per-trial consumed counts; trial t derives code/shuffle seeds from
    draw(base,t) exactly like the single-trial python path."""
    out = np.empty(n_trials, np.int32)
    P = np.empty((k, k), np.uint8)
    has_pivot = np.zeros(k, np.bool_)
    row = np.empty(k, np.uint8)
    order = np.empty(k + n_repairs, np.int32)
    for t in range(n_trials):
        ts = draw_at(base_seed, t)
        cs = draw_at(ts, 1)
        ss = draw_at(ts, 2)
        out[t] = _block_needed(k, n_repairs, has_heavy, mode, period, num, den,
                               cs, ss, P, has_pivot, row, order)
    return out


@njit(cache=True)
def _repairs_needed(k, n_repairs, has_heavy, mode, period, num, den,
                    code_seed, P, has_pivot, row):
    """Repair symbols consumed until the block decodes (all sources erased)."""
    for j in range(k):
        has_pivot[j] = False
    rank = 0
    for rid in range(n_repairs):
        if has_heavy and rid == 0:
            for t in range(k):
                row[t] = 1
        else:
            fill_row(row, draw_at(code_seed, rid), 0, period, num, den, mode)
            if has_heavy:
                for t in range(k):
                    row[t] ^= 1
        if insert_row(P, has_pivot, row):
            rank += 1
            if rank == k:
                return rid + 1
    return -1


@njit(cache=True)
def repairs_needed_single(k, n_repairs, has_heavy, mode, period, num, den,
                          code_seed):
    P = np.empty((k, k), np.uint8)
    has_pivot = np.zeros(k, np.bool_)
    row = np.empty(k, np.uint8)
    return _repairs_needed(k, n_repairs, has_heavy, mode, period, num, den,
                           code_seed, P, has_pivot, row)


@njit(cache=True)
def repairs_needed_batch(k, n_repairs, has_heavy, mode, period, num, den,
                         base_seed, n_trials):
    out = np.empty(n_trials, np.int32)
    P = np.empty((k, k), np.uint8)
    has_pivot = np.zeros(k, np.bool_)
    row = np.empty(k, np.uint8)
    for t in range(n_trials):
        ts = draw_at(base_seed, t)
        cs = draw_at(ts, 1)
        out[t] = _repairs_needed(k, n_repairs, has_heavy, mode, period, num,
                                 den, cs, P, has_pivot, row)
    return out


# ---------------------------------------------------------------------------
# GF(2) bitpacked variant for the plain binary baseline (no heavy row, no
# non-binary columns).  Rank over GF(2) equals rank over GF(2^8) for 0/1
# matrices, and the packed words make k=1000 trials cheap.

@njit(cache=True)
def _insert_row_gf2(P2, has_pivot, wrow, k):
    nw = wrow.shape[0]
    j = 0
    while j < k:
        w = j >> 6
        cur = wrow[w] & (~_U0 << np.uint64(j & 63))
        while cur == _U0:
            w += 1
            if w == nw:
                return False
            cur = wrow[w]
        b = 0
        while (cur >> np.uint64(b)) & _ONE == _U0:
            b += 1
        j = (w << 6) + b
        if j >= k:
            return False
        if not has_pivot[j]:
            for t in range(w, nw):
                P2[j, t] = wrow[t]
            has_pivot[j] = True
            return True
        for t in range(w, nw):
            wrow[t] ^= P2[j, t]
    return False


@njit(cache=True)
def _block_needed_gf2(k, n_repairs, num, den, code_seed, shuffle_seed,
                      P2, has_pivot, wrow, order):
    for j in range(k):
        has_pivot[j] = False
    nw = wrow.shape[0]
    nden = np.uint64(den)
    nnum = np.uint64(num)
    total = k + n_repairs
    for i in range(total):
        order[i] = i
    ctr = 0
    for i in range(total - 1, 0, -1):
        z = draw_at(shuffle_seed, ctr)
        ctr += 1
        jj = int(z % np.uint64(i + 1))
        tmp = order[i]
        order[i] = order[jj]
        order[jj] = tmp
    rank = 0
    for idx in range(total):
        s = order[idx]
        grew = False
        if s < k and not has_pivot[s]:
            for t in range(s >> 6, nw):
                P2[s, t] = _U0
            P2[s, s >> 6] = _ONE << np.uint64(s & 63)
            has_pivot[s] = True
            grew = True
        else:
            for t in range(nw):
                wrow[t] = _U0
            if s < k:
                wrow[s >> 6] = _ONE << np.uint64(s & 63)
            else:
                rs = draw_at(code_seed, s - k)
                for off in range(k):
                    if (draw_at(rs, off) % nden) < nnum:
                        wrow[off >> 6] |= _ONE << np.uint64(off & 63)
            grew = _insert_row_gf2(P2, has_pivot, wrow, k)
        if grew:
            rank += 1
            if rank == k:
                return idx + 1
    return -1


@njit(cache=True)
def block_needed_batch_gf2(k, n_repairs, num, den, base_seed, n_trials):
    nw = (k + 63) >> 6
    out = np.empty(n_trials, np.int32)
    P2 = np.empty((k, nw), np.uint64)
    has_pivot = np.zeros(k, np.bool_)
    wrow = np.empty(nw, np.uint64)
    order = np.empty(k + n_repairs, np.int32)
    for t in range(n_trials):
        ts = draw_at(base_seed, t)
        cs = draw_at(ts, 1)
        ss = draw_at(ts, 2)
        out[t] = _block_needed_gf2(k, n_repairs, num, den, cs, ss,
                                   P2, has_pivot, wrow, order)
    return out


# ---------------------------------------------------------------------------
# Sliding-window sessions.  The kernel replays the emission schedule, draws
# i.i.d. losses per emitted packet, then ranks the surviving equations over
# the lost source columns; a source is recoverable iff its unit vector lies
# in the row space.

@njit(cache=True)
def conv_session_residual(tot_src, k, cr_num, cr_den, heavy_period, period,
                          num, den, mode, has_heavy, fixed_window,
                          session_seed, loss_thresh):
    """Unrecovered source count at session end (0 = full recovery)."""
    loss_seed = draw_at(session_seed, 0)
    lost = np.zeros(tot_src, np.bool_)
    ucol = np.full(tot_src, -1, np.int32)
    lost_ids = np.empty(tot_src, np.int32)
    n_lost = 0
    max_rep = tot_src * (cr_den - cr_num) // cr_num + 2
    r_rid = np.empty(max_rep, np.int64)
    r_ws = np.empty(max_rep, np.int64)
    r_we = np.empty(max_rep, np.int64)
    r_heavy = np.zeros(max_rep, np.bool_)
    n_recv = 0
    emitted = 0
    repairs_emitted = 0
    boundary = 0
    for sid in range(tot_src):
        z = draw_at(loss_seed, emitted)
        emitted += 1
        if (z >> np.uint64(11)) < np.uint64(loss_thresh):
            lost[sid] = True
            ucol[sid] = n_lost
            lost_ids[n_lost] = sid
            n_lost += 1
        ns = sid + 1
        if ns < k:
            continue
        owed = ns * (cr_den - cr_num) // cr_num
        if owed <= repairs_emitted:
            continue
        we = ns - 1
        ws = (we if fixed_window else boundary) - k + 1
        if ws < 0:
            ws = 0
        while repairs_emitted < owed:
            slot = repairs_emitted
            is_heavy = has_heavy and (
                slot % heavy_period == 0 if heavy_period > 0 else slot == 0)
            z = draw_at(loss_seed, emitted)
            emitted += 1
            if (z >> np.uint64(11)) >= np.uint64(loss_thresh):
                r_rid[n_recv] = slot
                r_ws[n_recv] = ws
                r_we[n_recv] = we
                r_heavy[n_recv] = is_heavy
                n_recv += 1
            repairs_emitted += 1
        boundary = ns
    if n_lost == 0:
        return 0
    P = np.zeros((n_lost, n_lost), np.uint8)
    has_pivot = np.zeros(n_lost, np.bool_)
    row = np.empty(n_lost, np.uint8)
    rank = 0
    nden = np.uint64(den)
    nnum = np.uint64(num)
    for e in range(n_recv):
        if rank == n_lost:
            break
        for t in range(n_lost):
            row[t] = 0
        we = r_we[e]
        if r_heavy[e]:
            for t in range(n_lost):
                if lost_ids[t] <= we:
                    row[t] = 1
                else:
                    break
        else:
            rid = r_rid[e]
            row_seed = draw_at(rid, rid)       # header seed defaults to rid
            ws = r_ws[e]
            width = we - ws + 1
            nzf = 0
            n_bin = 0
            for off in range(width):
                z = draw_at(row_seed, off)
                j = ws + off
                c = np.uint8(0)
                if mode == MODE_GF256:
                    c = np.uint8(z % np.uint64(256))
                elif period > 0 and j % period == 0:
                    c = np.uint8(_ONE + z % np.uint64(255))
                else:
                    n_bin += 1
                    if (z % nden) < nnum:
                        c = np.uint8(1)
                if c != 0:
                    nzf += 1
                    if lost[j]:
                        row[ucol[j]] = c
            if mode == MODE_STRUCTURED and nzf == 0 and n_bin > 0:
                pick = int(draw_at(row_seed, width) % np.uint64(n_bin))
                cnt = 0
                for off in range(width):
                    j = ws + off
                    if period > 0 and j % period == 0:
                        continue
                    if cnt == pick:
                        if lost[j]:
                            row[ucol[j]] = 1
                        break
                    cnt += 1
            if has_heavy:
                for t in range(n_lost):
                    if lost_ids[t] <= we:
                        row[t] ^= 1
                    else:
                        break
        if insert_row(P, has_pivot, row):
            rank += 1
    if rank == n_lost:
        return 0
    undet = 0
    scratch = np.empty(n_lost, np.uint8)
    for c in range(n_lost):
        if not has_pivot[c]:
            undet += 1
            continue
        for t in range(c + 1, n_lost):
            scratch[t] = P[c, t]
        determined = True
        j = c + 1
        while j < n_lost:
            while j < n_lost and scratch[j] == 0:
                j += 1
            if j == n_lost:
                break
            if not has_pivot[j]:
                determined = False
                break
            cc = scratch[j]
            mrow = MUL_TABLE[cc]
            for t in range(j, n_lost):
                scratch[t] ^= mrow[P[j, t]]
            j += 1
        if not determined:
            undet += 1
    return undet


@njit(cache=True)
def conv_residual_batch(tot_src, k, cr_num, cr_den, heavy_period, period,
                        num, den, mode, has_heavy, fixed_window,
                        base_seed, loss_thresh, n_sessions):
    out = np.empty(n_sessions, np.int32)
    for s in range(n_sessions):
        out[s] = conv_session_residual(
            tot_src, k, cr_num, cr_den, heavy_period, period, num, den,
            mode, has_heavy, fixed_window, draw_at(base_seed, s),
            loss_thresh)
    return out
