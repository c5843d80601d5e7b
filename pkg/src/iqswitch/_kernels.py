"""JIT-compiled hot path for the slot loop.

Everything here operates on plain numpy arrays so the per-slot cost stays in
the microsecond range at N=64; the pure-Python classes in core/sampling/
schedulers implement the same semantics one object at a time and the test
suite pins the two paths against each other slot for slot.

Representation notes:

* Availability bitmaps are int64 scalars, bit t (LSB = earliest slot) set
  while the port is free; kernels therefore require T <= 63.  The Python
  path has no such limit.
* The joint calendar is a (T, N) int16 table of input indices (-1 empty);
  the sliding-window variant rotates a base row index instead of copying.
* VOQ packet timestamps live in a linked slab (ts/nxt arrays plus per-queue
  head/tail) so queues grow without per-queue reallocation.
* iSLIP request/grant masks use 32-bit limbs stored in int64 arrays, which
  sidesteps sign and type-promotion pitfalls of full 64-bit limbs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_KERNEL_T = 63

# ---------------------------------------------------------------------------
# traffic generation


@njit(cache=True)
def gen_bernoulli_chunk(seed, pair_ids, log1m, chunk, ev_cap):
    """Arrival events for `chunk` slots of i.i.d. Bernoulli traffic.

    For each (input, output) pair with rate lambda the inter-arrival gaps are
    geometric; memorylessness lets every chunk restart cleanly, so no state
    carries over.  Returns (offsets, pairs, count); count == -1 signals that
    ev_cap was too small and the caller must retry with a larger buffer.
    """
    np.random.seed(seed)
    npairs = pair_ids.shape[0]
    slots = np.empty(ev_cap, dtype=np.int32)
    prs = np.empty(ev_cap, dtype=np.int32)
    w = 0
    for k in range(npairs):
        denom = log1m[k]
        u = 1.0 - np.random.random()
        pos = np.log(u) / denom  # first arrival measured from slot 0
        while pos < chunk:
            if w == ev_cap:
                return np.empty(1, dtype=np.int64), prs, -1
            slots[w] = np.int32(pos)
            prs[w] = pair_ids[k]
            w += 1
            u = 1.0 - np.random.random()
            pos = np.float64(np.int64(pos) + 1) + np.log(u) / denom
    # counting sort by slot
    offsets = np.zeros(chunk + 1, dtype=np.int64)
    for t in range(w):
        offsets[slots[t] + 1] += 1
    for s in range(chunk):
        offsets[s + 1] += offsets[s]
    out = np.empty(w, dtype=np.int32)
    cursor = offsets[:chunk].copy()
    for t in range(w):
        s = slots[t]
        out[cursor[s]] = prs[t]
        cursor[s] += 1
    return offsets, out, w


@njit(cache=True)
def gen_onoff_chunk(seed, cumrows, p, q, phase, remaining, dest, chunk):
    """Arrival events for `chunk` slots of the two-state ON-OFF process.

    phase/remaining/dest are per-input state arrays updated in place; ON
    inputs emit one packet per slot to their burst destination.  Phase
    durations are geometric with support {0, 1, ...} (a state may last zero
    slots), so the mean ON duration is exactly (1-p)/p.
    """
    np.random.seed(seed)
    n = phase.shape[0]
    slots = np.empty(chunk * n, dtype=np.int32)
    prs = np.empty(chunk * n, dtype=np.int32)
    offsets = np.zeros(chunk + 1, dtype=np.int64)
    w = 0
    lg_on = np.log(1.0 - p)
    lg_off = np.log(1.0 - q)
    for s in range(chunk):
        for i in range(n):
            while remaining[i] == 0:
                if phase[i] == 1:
                    phase[i] = 0
                    u = 1.0 - np.random.random()
                    remaining[i] = np.int64(np.log(u) / lg_off)
                else:
                    phase[i] = 1
                    u = np.random.random() * cumrows[i, n - 1]
                    d = 0
                    while cumrows[i, d] <= u:
                        d += 1
                    dest[i] = d
                    u = 1.0 - np.random.random()
                    remaining[i] = np.int64(np.log(u) / lg_on)
            if phase[i] == 1:
                slots[w] = s
                prs[w] = i * n + dest[i]
                w += 1
            remaining[i] -= 1
        offsets[s + 1] = w
    return offsets, prs[:w].copy(), w


# ---------------------------------------------------------------------------
# Fenwick bank: one tree per input port over its N VOQ weights


@njit(cache=True, inline="always")
def fw_add(bank, i, j, delta, n):
    idx = j + 1
    while idx <= n:
        bank[i, idx] += delta
        idx += idx & (-idx)


@njit(cache=True, inline="always")
def fw_find(bank, i, thr, n, top):
    """Smallest j whose cumulative weight exceeds thr (thr in [0, total))."""
    pos = 0
    rem = thr
    bm = top
    while bm > 0:
        nxt = pos + bm
        if nxt <= n and bank[i, nxt] <= rem:
            pos = nxt
            rem -= bank[i, nxt]
        bm >>= 1
    return pos


@njit(cache=True)
def fw_top(n):
    top = 1
    while top * 2 <= n:
        top *= 2
    return top


# ---------------------------------------------------------------------------
# linked-slab FIFO of packet timestamps, one queue per VOQ


@njit(cache=True, inline="always")
def fifo_push(ts, nxt, head, tail, ctl, qid, value):
    # ctl: [free_head, bump, free_count]; caller guarantees capacity
    node = ctl[0]
    if node >= 0:
        ctl[0] = nxt[node]
    else:
        node = ctl[1]
        ctl[1] += 1
    ctl[2] -= 1
    ts[node] = value
    nxt[node] = -1
    t = tail[qid]
    if t >= 0:
        nxt[t] = node
    else:
        head[qid] = node
    tail[qid] = node


@njit(cache=True, inline="always")
def fifo_pop(ts, nxt, head, tail, ctl, qid):
    node = head[qid]
    v = ts[node]
    head[qid] = nxt[node]
    if head[qid] < 0:
        tail[qid] = -1
    nxt[node] = ctl[0]
    ctl[0] = node
    ctl[2] += 1
    return v


# ---------------------------------------------------------------------------
# shared per-slot pieces


@njit(cache=True, inline="always")
def first_set_bit(mask):
    t = 0
    while (mask >> t) & 1 == 0:
        t += 1
    return t


@njit(cache=True)
def apply_arrivals(pairs, a0, a1, now, n, lengths, w, bank, totals,
                   ts, nxt, head, tail, ctl, track):
    # w is the sampling-weight view of the VOQs: the packets still waiting
    # to be inserted into a calendar.  Arrivals raise both it and the
    # physical length.
    for k in range(a0, a1):
        pr = pairs[k]
        i = pr // n
        j = pr - i * n
        lengths[i, j] += 1
        w[i, j] += 1
        totals[i] += 1
        fw_add(bank, i, j, 1, n)
        if track:
            fifo_push(ts, nxt, head, tail, ctl, pr, now)


@njit(cache=True)
def qps_propose(window, n, top, bank, totals, lengths, prop_in, prop_out):
    """QPS proposing phase for all inputs plus the arrival-order shuffle.

    Input i proposes to one output drawn with probability weight/total using
    window[i]; the proposal list is then permuted with window[n:] so that
    per-output arrival order is an unbiased stand-in for race arrival.
    Returns the number of proposals.
    """
    cnt = 0
    for i in range(n):
        tot = totals[i]
        if tot > 0:
            j = fw_find(bank, i, window[i] * tot, n, top)
            prop_in[cnt] = i
            prop_out[cnt] = j
            cnt += 1
    # Fisher-Yates, consuming window[n + 0 ..] in a fixed order
    for k in range(cnt - 1, 0, -1):
        r = np.int64(window[n + (cnt - 1 - k)] * (k + 1))
        ti = prop_in[k]
        prop_in[k] = prop_in[r]
        prop_in[r] = ti
        to = prop_out[k]
        prop_out[k] = prop_out[r]
        prop_out[r] = to
    return cnt


@njit(cache=True)
def qps_accept_ffa(prop_in, prop_out, cnt, knockout, w, bank, totals,
                   cells, base, in_avail, out_avail, T, n,
                   kept, kept_cnt, touched):
    """Knockout plus First Fit Accepting for one iteration.

    Each output keeps the first `knockout` proposals in arrival order, sorts
    the survivors by VOQ length (descending, ties in arrival order) and
    commits each at the earliest mutually available slot of the window.
    A commit consumes one waiting packet from the sampling weights, so a
    scheduled packet no longer competes for further cells.
    """
    ntouched = 0
    for k in range(cnt):
        o = prop_out[k]
        c = kept_cnt[o]
        if c == 0:
            touched[ntouched] = o
            ntouched += 1
        if c < knockout:
            kept[o, c] = prop_in[k]
            kept_cnt[o] = c + 1
    for t in range(ntouched):
        o = touched[t]
        c = kept_cnt[o]
        # insertion sort by VOQ length, descending and stable
        for a in range(1, c):
            cur = kept[o, a]
            wcur = w[cur, o]
            b = a
            while b > 0 and w[kept[o, b - 1], o] < wcur:
                kept[o, b] = kept[o, b - 1]
                b -= 1
            kept[o, b] = cur
        for a in range(c):
            i = kept[o, a]
            both = in_avail[i] & out_avail[o]
            if both != 0:
                slot = first_set_bit(both)
                cells[(base + slot) % T, o] = i
                in_avail[i] &= ~(np.int64(1) << slot)
                out_avail[o] &= ~(np.int64(1) << slot)
                w[i, o] -= 1
                totals[i] -= 1
                fw_add(bank, i, o, -1, n)
        kept_cnt[o] = 0


@njit(cache=True)
def serve_row(row, now, n, lengths, w, bank, totals,
              ts, nxt, head, tail, ctl, track, serve_updates_weights):
    """Execute one crossbar configuration; returns (departures, delay_sum).

    A matched pair whose VOQ is empty by execution time transmits nothing.
    For the calendar algorithms the departing packet was already removed
    from the sampling weights when its cell was committed, so only the
    single-slot algorithms update the weights here.
    """
    deps = 0
    dsum = 0
    for o in range(n):
        i = row[o]
        if i >= 0 and lengths[i, o] > 0:
            lengths[i, o] -= 1
            if serve_updates_weights:
                w[i, o] -= 1
                totals[i] -= 1
                fw_add(bank, i, o, -1, n)
            deps += 1
            if track:
                arr = fifo_pop(ts, nxt, head, tail, ctl, i * n + o)
                dsum += now - arr
    return deps, dsum


# ---------------------------------------------------------------------------
# chunk runners (one per algorithm)


@njit(cache=True)
def run_swqps_chunk(start_slot, nslots, offsets, pairs, windows,
                    lengths, w, bank, totals, ts, nxt, head, tail, ctl,
                    cells, in_avail, out_avail, cal_state,
                    knockout, T, n, track,
                    kept, kept_cnt, touched, prop_in, prop_out, row,
                    batch_len, batch_dsum, batch_dcnt):
    """SW-QPS: graduate-and-slide one matching per slot, then run one
    propose/accept iteration on the slid window."""
    top = fw_top(n)
    arrivals = 0
    deps_total = 0
    dsum_total = 0
    topbit = np.int64(1) << (T - 1)
    for s in range(nslots):
        now = start_slot + s
        a0 = offsets[s]
        a1 = offsets[s + 1]
        apply_arrivals(pairs, a0, a1, now, n, lengths, w, bank, totals,
                       ts, nxt, head, tail, ctl, track)
        arrivals += a1 - a0
        # graduate the senior row (its window of opportunity has closed)
        base = cal_state[0]
        for o in range(n):
            row[o] = cells[base, o]
            cells[base, o] = -1
        cal_state[0] = (base + 1) % T
        for p in range(n):
            in_avail[p] = (in_avail[p] >> 1) | topbit
            out_avail[p] = (out_avail[p] >> 1) | topbit
        # one iteration against the slid window
        cnt = qps_propose(windows[s], n, top, bank, totals, lengths,
                          prop_in, prop_out)
        qps_accept_ffa(prop_in, prop_out, cnt, knockout, w, bank, totals,
                       cells, cal_state[0], in_avail, out_avail, T, n,
                       kept, kept_cnt, touched)
        deps, dsum = serve_row(row, now, n, lengths, w, bank, totals,
                               ts, nxt, head, tail, ctl, track, False)
        deps_total += deps
        dsum_total += dsum
        b = s // batch_len
        batch_dsum[b] += dsum
        batch_dcnt[b] += deps
    return arrivals, deps_total, dsum_total


@njit(cache=True)
def run_sbqps_chunk(start_slot, nslots, offsets, pairs, windows,
                    lengths, w, bank, totals, ts, nxt, head, tail, ctl,
                    cells, in_avail, out_avail, pending, cal_state,
                    knockout, T, n, track,
                    kept, kept_cnt, touched, prop_in, prop_out, row,
                    batch_len, batch_dsum, batch_dcnt):
    """SB-QPS: one iteration per slot on the in-progress calendar; every T
    slots the calendar graduates and the previous batch is what the crossbar
    executes (empty matchings before the first graduation)."""
    top = fw_top(n)
    arrivals = 0
    deps_total = 0
    dsum_total = 0
    full = (np.int64(1) << T) - 1
    for s in range(nslots):
        now = start_slot + s
        a0 = offsets[s]
        a1 = offsets[s + 1]
        apply_arrivals(pairs, a0, a1, now, n, lengths, w, bank, totals,
                       ts, nxt, head, tail, ctl, track)
        arrivals += a1 - a0
        cnt = qps_propose(windows[s], n, top, bank, totals, lengths,
                          prop_in, prop_out)
        qps_accept_ffa(prop_in, prop_out, cnt, knockout, w, bank, totals,
                       cells, 0, in_avail, out_avail, T, n,
                       kept, kept_cnt, touched)
        phase = now % T
        if cal_state[1] > 0:
            for o in range(n):
                row[o] = pending[phase, o]
        else:
            for o in range(n):
                row[o] = -1
        if phase == T - 1:
            for t in range(T):
                for o in range(n):
                    pending[t, o] = cells[t, o]
                    cells[t, o] = -1
            for p in range(n):
                in_avail[p] = full
                out_avail[p] = full
            cal_state[1] += 1
        deps, dsum = serve_row(row, now, n, lengths, w, bank, totals,
                               ts, nxt, head, tail, ctl, track, False)
        deps_total += deps
        dsum_total += dsum
        b = s // batch_len
        batch_dsum[b] += dsum
        batch_dcnt[b] += deps
    return arrivals, deps_total, dsum_total


@njit(cache=True)
def run_qps1_chunk(start_slot, nslots, offsets, pairs, windows,
                   lengths, w, bank, totals, ts, nxt, head, tail, ctl,
                   n, track, accept_longest, prop_in, prop_out, row,
                   batch_len, batch_dsum, batch_dcnt):
    """QPS-1: one proposing round; each output accepts one proposal for the
    current slot only.

    accept_longest picks the proposal with the largest VOQ length (ties in
    arrival order); otherwise the winner is the first proposal to arrive,
    which is uniform over proposals since arrival order is a uniform shuffle.
    """
    top = fw_top(n)
    arrivals = 0
    deps_total = 0
    dsum_total = 0
    for s in range(nslots):
        now = start_slot + s
        a0 = offsets[s]
        a1 = offsets[s + 1]
        apply_arrivals(pairs, a0, a1, now, n, lengths, w, bank, totals,
                       ts, nxt, head, tail, ctl, track)
        arrivals += a1 - a0
        cnt = qps_propose(windows[s], n, top, bank, totals, lengths,
                          prop_in, prop_out)
        for o in range(n):
            row[o] = -1
        for k in range(cnt):
            i = prop_in[k]
            o = prop_out[k]
            cur = row[o]
            if cur < 0 or (accept_longest and w[i, o] > w[cur, o]):
                row[o] = i
        deps, dsum = serve_row(row, now, n, lengths, w, bank, totals,
                               ts, nxt, head, tail, ctl, track, True)
        deps_total += deps
        dsum_total += dsum
        b = s // batch_len
        batch_dsum[b] += dsum
        batch_dcnt[b] += deps
    return arrivals, deps_total, dsum_total


@njit(cache=True, inline="always")
def _mask_first_from(mask, start, n, nwords):
    """First set bit of a 32-bit-limb mask, scanning cyclically from start."""
    for probe in range(2):
        lo = start if probe == 0 else 0
        hi = n if probe == 0 else start
        w = lo >> 5
        while (w << 5) < hi:
            word = mask[w]
            if word != 0:
                b = w << 5
                for t in range(32):
                    pos = b + t
                    if pos >= hi:
                        break
                    if pos >= lo and (word >> t) & 1 == 1:
                        return pos
            w += 1
    return -1


@njit(cache=True)
def run_islip_chunk(start_slot, nslots, offsets, pairs,
                    lengths, ts, nxt, head, tail, ctl,
                    req_mask, grant_ptr, accept_ptr, iters, n, track,
                    unmatched_in, grant_mask, granted_o, granted_i,
                    best_out, best_dist, row,
                    batch_len, batch_dsum, batch_dcnt):
    """iSLIP with ceil(log2 N) request-grant-accept iterations per slot.

    Pointers advance one past the match only when the grant is accepted in
    the first iteration.  req_mask[o] tracks inputs with a nonempty VOQ to o
    and is maintained incrementally on arrivals and departures.
    """
    nwords = (n + 31) >> 5
    arrivals = 0
    deps_total = 0
    dsum_total = 0
    for s in range(nslots):
        now = start_slot + s
        a0 = offsets[s]
        a1 = offsets[s + 1]
        for k in range(a0, a1):
            pr = pairs[k]
            i = pr // n
            j = pr - i * n
            if lengths[i, j] == 0:
                req_mask[j, i >> 5] |= np.int64(1) << (i & 31)
            lengths[i, j] += 1
            if track:
                fifo_push(ts, nxt, head, tail, ctl, pr, now)
        arrivals += a1 - a0
        for w in range(nwords):
            unmatched_in[w] = 0
        for i in range(n):
            unmatched_in[i >> 5] |= np.int64(1) << (i & 31)
        for o in range(n):
            row[o] = -1
        for it in range(iters):
            ngrants = 0
            for o in range(n):
                if row[o] >= 0:
                    continue
                for w in range(nwords):
                    grant_mask[w] = req_mask[o, w] & unmatched_in[w]
                g = _mask_first_from(grant_mask, grant_ptr[o], n, nwords)
                if g >= 0:
                    granted_o[ngrants] = o
                    granted_i[ngrants] = g
                    ngrants += 1
            if ngrants == 0:
                break
            # accept: each granted input takes the output nearest its pointer
            for k in range(ngrants):
                i = granted_i[k]
                o = granted_o[k]
                d = o - accept_ptr[i]
                if d < 0:
                    d += n
                if best_out[i] < 0 or d < best_dist[i]:
                    best_out[i] = o
                    best_dist[i] = d
            for k in range(ngrants):
                i = granted_i[k]
                o = best_out[i]
                if o >= 0:
                    best_out[i] = -1
                    row[o] = i
                    unmatched_in[i >> 5] &= ~(np.int64(1) << (i & 31))
                    if it == 0:
                        grant_ptr[o] = (i + 1) % n
                        accept_ptr[i] = (o + 1) % n
        deps = 0
        dsum = 0
        for o in range(n):
            i = row[o]
            if i >= 0 and lengths[i, o] > 0:
                lengths[i, o] -= 1
                if lengths[i, o] == 0:
                    req_mask[o, i >> 5] &= ~(np.int64(1) << (i & 31))
                deps += 1
                if track:
                    arr = fifo_pop(ts, nxt, head, tail, ctl, i * n + o)
                    dsum += now - arr
        deps_total += deps
        dsum_total += dsum
        b = s // batch_len
        batch_dsum[b] += dsum
        batch_dcnt[b] += deps
    return arrivals, deps_total, dsum_total
