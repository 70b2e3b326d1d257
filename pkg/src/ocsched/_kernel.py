"""Compiled inner loop: one scheduling epoch over flat arrays.

The scheduler state lives in preallocated numpy arrays owned by
``scheduler.SchedulerState``; this module runs the per-epoch iteration
pipeline (candidate selection, destination contention, wavelength
decision, wavelength contention, timeslot allocation, buffer compaction)
entirely inside one njit call.  Occupancy and arbitration sets are uint64
bitsets, which is why node and slot counts are capped at 64.

Request status codes (``st_status``):
  0 idle (not part of the current epoch)
  1 pending
  2 fully granted
  3 partially granted, residue re-buffered
  4 invalidated (wavelength contradiction), re-buffered
  5 no free slot on the decided wavelength, re-buffered
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .arbiter import rr_grant, _popcount, _trailing_zeros

IDLE = 0
PENDING = 1
GRANTED = 2
PARTIAL = 3
INVALID = 4
WDBUF = 5

ALG_EPOCH = 0
ALG_SLOT = 1

# out_stats layout
S_GRANTED_SLOTS = 0
S_INVALIDATED = 1
S_PARTIAL = 2
S_WDBUF = 3
S_UNTOUCHED_BUF = 4
S_UNTOUCHED_NODE = 5
S_ITERATIONS = 6
S_BUF_ITERATIONS = 7
S_DISTINCT_WL = 8
S_OCCUPIED_CELLS = 9
S_BUFFER_AFTER = 10
S_INPUT_BUF = 11
S_INPUT_NEW = 12
S_COMPLETED = 13
S_WINDOW_DEPTH = 14

_U0 = np.uint64(0)
_U1 = np.uint64(1)


@njit(cache=True, inline="always")
def _bit(i):
    return _U1 << np.uint64(i)


@njit(cache=True)
def run_epoch(
    alg, n, w, t, iters, i_buf, coarse_iters, shift_thr, vis_depth, rom_tries, log_grants,
    st_src, st_dst, st_rem, st_retry, st_status, st_maxslot,
    buf, buf_head, buf_tail, new_rows,
    dptr, sptr, wptr, rom, rom_cur,
    cell_src, cell_dst, lock_src, lock_dst,
    comp_rows, comp_maxslot,
    g_req, g_wl, g_mask,
    out_stats,
):
    if t >= 64:
        t_full = ~_U0
    else:
        t_full = (_U1 << np.uint64(t)) - _U1

    for lam in range(w):
        for ti in range(t):
            cell_src[lam, ti] = -1
            cell_dst[lam, ti] = -1
    for i in range(n):
        lock_src[i] = -1
        lock_dst[i] = -1

    wl_occ = np.zeros(w, dtype=np.uint64)
    src_occ = np.zeros(n, dtype=np.uint64)
    dst_occ = np.zeros(n, dtype=np.uint64)

    # visible slice of the retry buffer: oldest vis_depth requests per source
    vis = np.empty((n, max(vis_depth, 1)), dtype=np.int64)
    vis_cnt = np.zeros(n, dtype=np.int64)
    n_vis = 0
    if i_buf > 0:
        for s in range(n):
            qlen = buf_tail[s] - buf_head[s]
            c = qlen if qlen < vis_depth else vis_depth
            for j in range(c):
                row = buf[s, buf_head[s] + j]
                vis[s, j] = row
                st_status[row] = PENDING
                st_maxslot[row] = -1
            vis_cnt[s] = c
            n_vis += c
    max_depth = 0
    for s in range(n):
        if vis_cnt[s] > max_depth:
            max_depth = vis_cnt[s]

    # per-source FIFO list of this epoch's node requests
    n_new = new_rows.shape[0]
    node_cnt = np.zeros(n, dtype=np.int64)
    for i in range(n_new):
        row = new_rows[i]
        node_cnt[st_src[row]] += 1
        st_status[row] = PENDING
        st_maxslot[row] = -1
    node_start = np.zeros(n, dtype=np.int64)
    acc = 0
    for s in range(n):
        node_start[s] = acc
        acc += node_cnt[s]
    node_end = node_start + node_cnt
    node_list = np.empty(max(n_new, 1), dtype=np.int64)
    node_pos = node_start.copy()
    for i in range(n_new):
        row = new_rows[i]
        s = st_src[row]
        node_list[node_pos[s]] = row
        node_pos[s] += 1
    node_head = node_start.copy()

    # slot-level: per (section, source, dest) FIFO groups + dest bitmask per source
    n_groups = 2 * n * n
    if alg == ALG_SLOT:
        grp_cnt = np.zeros(n_groups, dtype=np.int64)
        for s in range(n):
            for j in range(vis_cnt[s]):
                grp_cnt[s * n + st_dst[vis[s, j]]] += 1
        for i in range(n_new):
            row = node_list[i]
            grp_cnt[n * n + st_src[row] * n + st_dst[row]] += 1
        grp_start = np.zeros(n_groups, dtype=np.int64)
        acc = 0
        for g in range(n_groups):
            grp_start[g] = acc
            acc += grp_cnt[g]
        grp_end = grp_start + grp_cnt
        grp_list = np.empty(max(n_vis + n_new, 1), dtype=np.int64)
        grp_pos = grp_start.copy()
        for s in range(n):
            for j in range(vis_cnt[s]):
                row = vis[s, j]
                g = s * n + st_dst[row]
                grp_list[grp_pos[g]] = row
                grp_pos[g] += 1
        for i in range(n_new):
            row = node_list[i]
            g = n * n + st_src[row] * n + st_dst[row]
            grp_list[grp_pos[g]] = row
            grp_pos[g] += 1
        grp_head = grp_start.copy()
        grp_pending = grp_cnt.copy()
        dmask = np.zeros((2, n), dtype=np.uint64)
        for sec in range(2):
            for s in range(n):
                for d in range(n):
                    if grp_cnt[sec * n * n + s * n + d] > 0:
                        dmask[sec, s] |= _bit(d)
    else:
        # tiny placeholders so type inference stays happy
        grp_end = np.zeros(1, dtype=np.int64)
        grp_list = np.zeros(1, dtype=np.int64)
        grp_head = np.zeros(1, dtype=np.int64)
        grp_pending = np.zeros(1, dtype=np.int64)
        dmask = np.zeros((2, 1), dtype=np.uint64)

    pend_buf = n_vis
    pend_node = n_new

    window_depth = 0
    win_total = 0
    for s in range(n):
        if vis_cnt[s] > 0:
            win_total += 1
    win_granted = 0
    buffer_phase = (i_buf > 0) and (n_vis > 0)

    iters_used = 0
    buf_iters = 0
    comp_count = 0
    g_count = 0
    granted_slots = 0
    n_inval = 0
    n_partial = 0
    n_wdbuf = 0

    cand_row = np.full(n, -1, dtype=np.int64)
    dest_mask = np.zeros(n, dtype=np.uint64)
    touched_d = np.empty(n, dtype=np.int64)
    win_src = np.empty(n, dtype=np.int64)
    pair_row = np.full(n, -1, dtype=np.int64)
    wl_mask = np.zeros(w, dtype=np.uint64)
    touched_w = np.empty(w, dtype=np.int64)

    for it in range(1, iters + 1):
        # Section choice: the first i_buf iterations serve the buffer, the
        # rest serve new requests; iterations left over once one pool
        # drains go to the other so the budget is never idled away.
        buffer_ok = pend_buf > 0
        if buffer_ok and alg == ALG_EPOCH:
            # skip windows with no pending member left
            while window_depth < max_depth:
                has_pending = False
                for s in range(n):
                    if vis_cnt[s] > window_depth and st_status[vis[s, window_depth]] == PENDING:
                        has_pending = True
                        break
                if has_pending:
                    break
                window_depth += 1
                win_granted = 0
                win_total = 0
                for s in range(n):
                    if vis_cnt[s] > window_depth:
                        win_total += 1
            if window_depth >= max_depth:
                buffer_ok = False
        if buffer_phase and (it > i_buf or not buffer_ok):
            buffer_phase = False
        if buffer_phase:
            sec = 0
        elif pend_node > 0:
            sec = 1
        elif buffer_ok:
            sec = 0
        else:
            break
        coarse = (alg == ALG_EPOCH) or (it <= coarse_iters)

        # --- candidate selection: at most one request per source ---
        n_cand = 0
        for s in range(n):
            cand_row[s] = -1
        if alg == ALG_EPOCH:
            if sec == 0:
                for s in range(n):
                    if vis_cnt[s] > window_depth:
                        row = vis[s, window_depth]
                        if st_status[row] == PENDING:
                            cand_row[s] = row
                            n_cand += 1
            else:
                for s in range(n):
                    h = node_head[s]
                    while h < node_end[s] and st_status[node_list[h]] != PENDING:
                        h += 1
                    node_head[s] = h
                    if h < node_end[s]:
                        cand_row[s] = node_list[h]
                        n_cand += 1
        else:
            base = sec * n * n
            for s in range(n):
                m = dmask[sec, s]
                if m == _U0:
                    continue
                d = rr_grant(m, sptr[s], n)
                sptr[s] = (d + 1) % n
                g = base + s * n + d
                h = grp_head[g]
                while h < grp_end[g] and st_status[grp_list[h]] != PENDING:
                    h += 1
                grp_head[g] = h
                cand_row[s] = grp_list[h]
                n_cand += 1
        if n_cand == 0:
            if sec == 0:
                buffer_phase = False
                continue
            break

        # --- destination contention: one winner per destination ---
        n_td = 0
        for s in range(n):
            row = cand_row[s]
            if row < 0:
                continue
            d = st_dst[row]
            if dest_mask[d] == _U0:
                touched_d[n_td] = d
                n_td += 1
            dest_mask[d] |= _bit(s)
        n_win = 0
        for i in range(n_td):
            d = touched_d[i]
            sw = rr_grant(dest_mask[d], dptr[d], n)
            dptr[d] = (sw + 1) % n
            dest_mask[d] = _U0
            win_src[n_win] = sw
            n_win += 1

        # --- wavelength decision per contention-free pair ---
        n_tw = 0
        for i in range(n_win):
            s = win_src[i]
            row = cand_row[s]
            d = st_dst[row]
            lam = np.int64(-1)
            if alg == ALG_EPOCH:
                a = lock_src[s]
                b = lock_dst[d]
                if a >= 0 and b >= 0 and a != b:
                    st_status[row] = INVALID
                    n_inval += 1
                    if sec == 0:
                        pend_buf -= 1
                    else:
                        pend_node -= 1
                    continue
                if a >= 0:
                    lam = np.int64(a)
                elif b >= 0:
                    lam = np.int64(b)
            if lam >= 0:
                # a lock is binding: no retry on a different wavelength
                free = (~(wl_occ[lam] | src_occ[s] | dst_occ[d])) & t_full
            elif rom_tries == 0:
                # random assignment subject to timeslot availability: take
                # the first wavelength at or after the ROM entry (wrapping)
                # with a slot free for both endpoints
                start = rom[s, rom_cur[s]]
                rom_cur[s] = (rom_cur[s] + 1) % t
                free = _U0
                for off in range(w):
                    cand = start + off
                    if cand >= w:
                        cand -= w
                    f = (~(wl_occ[cand] | src_occ[s] | dst_occ[d])) & t_full
                    if f != _U0:
                        lam = cand
                        free = f
                        break
            else:
                # strict draw: consume up to rom_tries ROM entries, take the
                # first with a slot free for both endpoints
                free = _U0
                for _ in range(rom_tries):
                    lam = rom[s, rom_cur[s]]
                    rom_cur[s] = (rom_cur[s] + 1) % t
                    free = (~(wl_occ[lam] | src_occ[s] | dst_occ[d])) & t_full
                    if free != _U0:
                        break
            if free == _U0:
                st_status[row] = WDBUF
                n_wdbuf += 1
                if sec == 0:
                    pend_buf -= 1
                else:
                    pend_node -= 1
                if alg == ALG_SLOT:
                    g = sec * n * n + s * n + d
                    grp_pending[g] -= 1
                    if grp_pending[g] == 0:
                        dmask[sec, s] &= ~_bit(d)
                continue
            pair_row[s] = row
            if wl_mask[lam] == _U0:
                touched_w[n_tw] = lam
                n_tw += 1
            wl_mask[lam] |= _bit(s)

        # --- wavelength contention + timeslot allocation ---
        for i in range(n_tw):
            lam = touched_w[i]
            m = wl_mask[lam]
            wl_mask[lam] = _U0
            sw = rr_grant(m, wptr[lam], n)
            wptr[lam] = (sw + 1) % n
            row = pair_row[sw]
            d = st_dst[row]
            free = (~(wl_occ[lam] | src_occ[sw] | dst_occ[d])) & t_full
            rem = st_rem[row]
            if coarse:
                avail = _popcount(free)
                k = rem if rem < avail else avail
            else:
                k = 1
            alloc = _U0
            for _ in range(k):
                b = free & (_U0 - free)
                ti = _trailing_zeros(b)
                cell_src[lam, ti] = sw
                cell_dst[lam, ti] = d
                if ti > st_maxslot[row]:
                    st_maxslot[row] = ti
                alloc |= b
                free ^= b
            wl_occ[lam] |= alloc
            src_occ[sw] |= alloc
            dst_occ[d] |= alloc
            granted_slots += k
            st_rem[row] = rem - k
            if alg == ALG_EPOCH:
                lock_src[sw] = lam
                lock_dst[d] = lam
            if log_grants:
                g_req[g_count] = row
                g_wl[g_count] = lam
                g_mask[g_count] = alloc
                g_count += 1
            if st_rem[row] == 0:
                st_status[row] = GRANTED
                comp_rows[comp_count] = row
                comp_maxslot[comp_count] = st_maxslot[row]
                comp_count += 1
                if sec == 0:
                    pend_buf -= 1
                    if alg == ALG_EPOCH:
                        win_granted += 1
                else:
                    pend_node -= 1
                if alg == ALG_SLOT:
                    g = sec * n * n + sw * n + d
                    grp_pending[g] -= 1
                    if grp_pending[g] == 0:
                        dmask[sec, sw] &= ~_bit(d)
            elif coarse:
                st_status[row] = PARTIAL
                n_partial += 1
                if sec == 0:
                    pend_buf -= 1
                else:
                    pend_node -= 1
                if alg == ALG_SLOT:
                    g = sec * n * n + sw * n + d
                    grp_pending[g] -= 1
                    if grp_pending[g] == 0:
                        dmask[sec, sw] &= ~_bit(d)
            # a fine-phase partial stays pending and competes again

        iters_used += 1
        if sec == 0:
            buf_iters += 1
            if alg == ALG_EPOCH and win_total > 0:
                if win_granted >= shift_thr * win_total:
                    window_depth += 1
                    win_granted = 0
                    win_total = 0
                    for s in range(n):
                        if vis_cnt[s] > window_depth:
                            win_total += 1
                    if window_depth >= max_depth:
                        buffer_phase = False

    # --- epoch end: compact buffer survivors, append node leftovers ---
    untouched_buf = 0
    untouched_node = 0
    for s in range(n):
        c = vis_cnt[s]
        if c == 0:
            continue
        h = buf_head[s]
        k = 0
        for j in range(c):
            if st_status[vis[s, j]] != GRANTED:
                k += 1
        # statuses persist after the epoch as the row's last outcome;
        # the next epoch re-marks its own inputs PENDING before use
        write_pos = h + c - k
        for j in range(c):
            row = vis[s, j]
            st = st_status[row]
            if st != GRANTED:
                buf[s, write_pos] = row
                write_pos += 1
                if st == PENDING:
                    untouched_buf += 1
                else:
                    st_retry[row] += 1
        buf_head[s] = h + c - k
    for s in range(n):
        for i in range(node_start[s], node_end[s]):
            row = node_list[i]
            st = st_status[row]
            if st != GRANTED:
                buf[s, buf_tail[s]] = row
                buf_tail[s] += 1
                if st == PENDING:
                    untouched_node += 1
                else:
                    st_retry[row] += 1

    distinct = 0
    cells = 0
    for lam in range(w):
        if wl_occ[lam] != _U0:
            distinct += 1
            cells += _popcount(wl_occ[lam])
    buffer_after = 0
    for s in range(n):
        buffer_after += buf_tail[s] - buf_head[s]

    out_stats[S_GRANTED_SLOTS] = granted_slots
    out_stats[S_INVALIDATED] = n_inval
    out_stats[S_PARTIAL] = n_partial
    out_stats[S_WDBUF] = n_wdbuf
    out_stats[S_UNTOUCHED_BUF] = untouched_buf
    out_stats[S_UNTOUCHED_NODE] = untouched_node
    out_stats[S_ITERATIONS] = iters_used
    out_stats[S_BUF_ITERATIONS] = buf_iters
    out_stats[S_DISTINCT_WL] = distinct
    out_stats[S_OCCUPIED_CELLS] = cells
    out_stats[S_BUFFER_AFTER] = buffer_after
    out_stats[S_INPUT_BUF] = n_vis
    out_stats[S_INPUT_NEW] = n_new
    out_stats[S_COMPLETED] = comp_count
    out_stats[S_WINDOW_DEPTH] = window_depth
    return comp_count, g_count
