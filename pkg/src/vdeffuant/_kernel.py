"""Compiled inner loops: the arrow-event loop, state audit and log replays.

All state lives in caller-owned numpy arrays so the loop can stop and resume
at any event boundary (time horizon, event budget, exhausted random buffer,
full log) without changing the realized trajectory.
"""
import numpy as np
from numba import njit

# int64 counters in ``ictr``
CURSOR = 0
EVENTS = 1
ACTIVE = 2
ANNIHILATIONS = 3
PARTICLES = 4
LIVE_EDGES = 5
LOG_POS = 6
EXITS = 7
N_ICTR = 8

# float64 clocks in ``fctr``
CLOCK = 0
NEXT_TIME = 1
LAST_TIME = 2
LAST_MARK = 3
N_FCTR = 4

# last event record: site, level, direction, active, annihilated, edge
N_LAST = 6

# exit statuses
STOP_TIME = 0
STOP_EVENTS = 1
STOP_EXTINCT = 2
NEED_RANDOM = 3
LOG_FULL = 4
AUDIT_FAIL = 5

# log columns (int64 part): event index, site, level, direction, active, annihilated
N_LOG_COLS = 6


@njit(cache=True)
def popcount(x):
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def recompute_xi(opinions, ring, out):
    L = opinions.shape[0]
    for e in range(L - 1):
        out[e] = opinions[e] ^ opinions[e + 1]
    if ring:
        out[L - 1] = opinions[L - 1] ^ opinions[0]


@njit(cache=True)
def _audit(opinions, xi, zeta, ring, F, scratch, expected_sum):
    """Recompute the particle picture from opinions and compare. Returns an error code."""
    recompute_xi(opinions, ring, scratch)
    total = 0
    for e in range(xi.shape[0]):
        if scratch[e] != xi[e]:
            return 1
        z = popcount(xi[e])
        if z != zeta[e]:
            return 2
        total += z
    if total != expected_sum:
        return 3
    if ring:
        for i in range(F):
            bit = np.uint64(1) << np.uint64(i)
            par = 0
            for e in range(xi.shape[0]):
                if xi[e] & bit:
                    par ^= 1
            if par != 0:
                return 4
    return 0


@njit(cache=True)
def run_events(opinions, xi, zeta, rates, ring, F, uniforms, ictr, fctr, last,
               qual, act, touched, log_f, log_i, log_all,
               t_max, max_events, stop_on_extinct, audit, scratch, skip_absorbed):
    L = opinions.shape[0]
    total_rate = float(L * F)
    n_uniform = uniforms.shape[0]
    log_cap = log_f.shape[0]
    one = np.uint64(1)
    while True:
        if stop_on_extinct and (ictr[PARTICLES] == 0 or ictr[LIVE_EDGES] == 0):
            return STOP_EXTINCT
        if ictr[EVENTS] >= max_events:
            return STOP_EVENTS
        t = fctr[NEXT_TIME]
        if skip_absorbed and t <= t_max and t_max < np.inf and (ictr[PARTICLES] == 0 or ictr[LIVE_EDGES] == 0):
            # nothing can change any more: jump to the horizon and redraw the next ring
            c = ictr[CURSOR]
            if c + 4 > n_uniform:
                return NEED_RANDOM
            ictr[CURSOR] = c + 4
            fctr[NEXT_TIME] = t_max - np.log1p(-uniforms[c + 3]) / total_rate
            fctr[CLOCK] = t_max
            return STOP_TIME
        if t > t_max:
            if fctr[CLOCK] < t_max:
                fctr[CLOCK] = t_max
            return STOP_TIME
        c = ictr[CURSOR]
        if c + 4 > n_uniform:
            return NEED_RANDOM
        u_pick = uniforms[c]
        u_dir = uniforms[c + 1]
        mark = 1.0 - uniforms[c + 2]  # in (0, 1], so a zero rate never fires
        u_wait = uniforms[c + 3]
        ictr[CURSOR] = c + 4

        k = int(u_pick * L * F)
        if k >= L * F:
            k = L * F - 1
        x = k // F
        i = k - x * F
        B = 1 if u_dir < 0.5 else -1

        fctr[CLOCK] = t
        fctr[LAST_TIME] = t
        fctr[LAST_MARK] = mark
        fctr[NEXT_TIME] = t - np.log1p(-u_wait) / total_rate
        ictr[EVENTS] += 1

        # edge crossed by the arrow, target site, and the target's far edge
        e = -1
        y = -1
        e2 = -1
        if B == 1:
            if ring or x < L - 1:
                e = x
                y = x + 1
                if y == L:
                    y = 0
                if ring or y < L - 1:
                    e2 = y
        else:
            if ring or x > 0:
                e = x - 1
                y = x - 1
                if e < 0:
                    e = L - 1
                    y = L - 1
                if ring:
                    e2 = y - 1
                    if e2 < 0:
                        e2 = L - 1
                elif y > 0:
                    e2 = y - 1

        active = False
        annihilated = False
        bit = one << np.uint64(i)
        j = 0
        if e >= 0:
            j = zeta[e]
            if xi[e] & bit:
                qual[j] += 1
                if mark <= rates[j]:
                    active = True
                    act[j] += 1
        if active:
            opinions[y] ^= bit
            # source edge loses the particle
            was_live = rates[j] > 0.0
            xi[e] ^= bit
            zeta[e] = j - 1
            now_live = j - 1 > 0 and rates[j - 1] > 0.0
            ictr[LIVE_EDGES] += int(now_live) - int(was_live)
            touched[e] = True
            if e2 >= 0:
                j2 = zeta[e2]
                was_live = j2 > 0 and rates[j2] > 0.0
                if xi[e2] & bit:
                    annihilated = True
                    xi[e2] ^= bit
                    j2 -= 1
                    ictr[PARTICLES] -= 2
                    ictr[ANNIHILATIONS] += 1
                else:
                    xi[e2] |= bit
                    j2 += 1
                zeta[e2] = j2
                now_live = j2 > 0 and rates[j2] > 0.0
                ictr[LIVE_EDGES] += int(now_live) - int(was_live)
                touched[e2] = True
            else:
                ictr[PARTICLES] -= 1
                ictr[EXITS] += 1
            ictr[ACTIVE] += 1

        last[0] = x
        last[1] = i
        last[2] = B
        last[3] = int(active)
        last[4] = int(annihilated)
        last[5] = e

        if audit:
            if e >= 0 and active and j > 0 and rates[j] <= 0.0:
                return AUDIT_FAIL
            if _audit(opinions, xi, zeta, ring, F, scratch, ictr[PARTICLES]) != 0:
                return AUDIT_FAIL

        if active or log_all:
            p = ictr[LOG_POS]
            log_f[p] = t
            log_i[p, 0] = ictr[EVENTS] - 1
            log_i[p, 1] = x
            log_i[p, 2] = i
            log_i[p, 3] = B
            log_i[p, 4] = int(active)
            log_i[p, 5] = int(annihilated)
            ictr[LOG_POS] = p + 1
            if p + 1 >= log_cap:
                return LOG_FULL


@njit(cache=True)
def replay_ledger(xi0, ring, theta_eff, log_i, n, kind, init_size, orig, closed, count, tally,
                  count_then_close):
    """Replay active events through the contribution ledger.

    ``kind`` is 0 for edges that start live (or empty) and 1 for initial
    blockades. Pile sizes are tracked from ``xi0`` onwards.
    """
    n_edges = xi0.shape[0]
    L = n_edges if ring else n_edges + 1
    zeta = np.empty(n_edges, dtype=np.int64)
    for e in range(n_edges):
        zeta[e] = popcount(xi0[e])
    for r in range(n):
        if log_i[r, 4] == 0:
            continue
        x = log_i[r, 1]
        i = log_i[r, 2]
        B = log_i[r, 3]
        ann = log_i[r, 5] != 0
        if B == 1:
            e = x
            y = x + 1 if x + 1 < L else 0
            e2 = y if (ring or y < L - 1) else -1
        else:
            e = x - 1 if x > 0 else L - 1
            y = e
            if ring:
                e2 = y - 1 if y > 0 else L - 1
            else:
                e2 = y - 1 if y > 0 else -1
        zeta[e] -= 1
        z2 = 0
        if e2 >= 0:
            z2 = zeta[e2] - 1 if ann else zeta[e2] + 1
            zeta[e2] = z2
        ledger_update(e, e2, i, ann, z2, theta_eff, kind, init_size, orig, closed, count, tally,
                      count_then_close)


@njit(cache=True)
def ledger_update(e, e2, i, ann, zeta_dst_after, theta_eff, kind, init_size, orig, closed, count, tally,
                  count_then_close):
    """Apply one active jump (level ``i``, from edge ``e`` onto ``e2``) to the ledger.

    ``count_then_close`` decides whether an annihilation that removes an
    original particle of a live edge is counted before that edge closes.
    """
    bit = np.uint64(1) << np.uint64(i)
    # an original particle of a live edge leaving it closes that edge's window
    if not closed[e] and kind[e] == 0 and orig[e] & bit:
        orig[e] ^= bit
        closed[e] = True
        tally[e] = count[e] - init_size[e]
    if e2 < 0 or closed[e2]:
        return
    if ann:
        if kind[e2] == 0:
            if orig[e2] & bit:
                orig[e2] ^= bit
                closed[e2] = True
                tally[e2] = count[e2] + int(count_then_close) - init_size[e2]
            count[e2] += 1
            return
        count[e2] += 1
        if zeta_dst_after <= theta_eff:
            closed[e2] = True
            tally[e2] = count[e2] - theta_eff
    elif zeta_dst_after > theta_eff:
        count[e2] += 1


@njit(cache=True)
def ancestors(log_f, log_i, n, L, ring, sites, times, levels, use_level):
    """Backward active-path walk for each probe ``(site, time, level)``.

    ``log_i`` rows are (event index, source, level, direction, ...), active
    arrows only, in increasing time. Returns the ancestor site per probe.
    """
    m = sites.shape[0]
    out = np.empty(m, dtype=np.int64)
    for q in range(m):
        cur = sites[q]
        t = times[q]
        # last row with time <= t
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) // 2
            if log_f[mid] <= t:
                lo = mid + 1
            else:
                hi = mid
        r = lo - 1
        while r >= 0:
            if log_i[r, 4] != 0 and ((not use_level) or log_i[r, 2] == levels[q]):
                src = log_i[r, 1]
                tgt = src + log_i[r, 3]
                if ring:
                    if tgt == L:
                        tgt = 0
                    elif tgt < 0:
                        tgt = L - 1
                if tgt == cur:
                    cur = src
            r -= 1
        out[q] = cur
    return out


@njit(cache=True)
def forward_labels(log_i, n, L, ring, level, t_index):
    """Propagate time-0 site labels forward through the first ``t_index`` active arrows at ``level``."""
    lab = np.arange(L)
    for r in range(min(n, t_index)):
        if log_i[r, 4] == 0 or log_i[r, 2] != level:
            continue
        src = log_i[r, 1]
        tgt = src + log_i[r, 3]
        if ring:
            if tgt == L:
                tgt = 0
            elif tgt < 0:
                tgt = L - 1
        lab[tgt] = lab[src]
    return lab
