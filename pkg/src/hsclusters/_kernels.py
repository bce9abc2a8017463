"""Compiled inner loops for the event-driven engine and the cluster analysis.

Everything here works on plain arrays and scalars so it can be jitted.
The public wrappers in :mod:`hsclusters.engine` and :mod:`hsclusters.clusters`
do argument checking and build the result objects.
"""
import heapq
import math

import numpy as np
from numba import njit

INF = math.inf

# event kinds, in tie-break order
WALL = 0
CELL = 1
PAIR = 2

# engine status codes
OK = 0
SCHEDULER_ERROR = 1
OVERLAP_ERROR = 2


@njit(cache=True)
def pair_time(dx0, dx1, dx2, dv0, dv1, dv2, eps2, grazing):
    """Time until |dx + s dv| = eps for an approaching pair, or inf.

    ``grazing`` is compared with the dimensionless discriminant
    disc / (|dv|^2 eps^2) = 1 - (b_perp / eps)^2, which keeps the miss test
    invariant under a uniform rescaling of velocities.
    """
    b = dx0 * dv0 + dx1 * dv1 + dx2 * dv2
    if b >= 0.0:
        return INF
    vv = dv0 * dv0 + dv1 * dv1 + dv2 * dv2
    rr = dx0 * dx0 + dx1 * dx1 + dx2 * dx2
    c = rr - eps2
    disc = b * b - vv * c
    if disc < grazing * vv * eps2 or disc <= 0.0:
        return INF
    # cancellation-free root of vv s^2 + 2 b s + c = 0
    s = c / (-b + math.sqrt(disc))
    if s < 0.0:
        s = 0.0
    return s


@njit(cache=True)
def wall_time(x, v, lo, hi):
    """Earliest time the centre reaches a wall plane at ``lo`` or ``hi``.

    Returns (time, face) with face = 2*axis + (1 if positive side).
    """
    best = INF
    face = -1
    for a in range(3):
        va = v[a]
        if va > 0.0:
            s = (hi - x[a]) / va
            f = 2 * a + 1
        elif va < 0.0:
            s = (lo - x[a]) / va
            f = 2 * a
        else:
            continue
        if s < 0.0:
            s = 0.0
        if s < best:
            best = s
            face = f
    return best, face


@njit(cache=True)
def resolve_pair(vp, vq, w):
    """In-place elastic exchange along unit vector w."""
    k = w[0] * (vp[0] - vq[0]) + w[1] * (vp[1] - vq[1]) + w[2] * (vp[2] - vq[2])
    for a in range(3):
        vp[a] = vp[a] - w[a] * k
        vq[a] = vq[a] + w[a] * k


# ---------------------------------------------------------------------------
# cell grid helpers


@njit(cache=True)
def _cell_index(c, ncell):
    return (c[0] * ncell + c[1]) * ncell + c[2]


@njit(cache=True)
def _cell_add(i, cid, members, counts, slot):
    n = counts[cid]
    if n == members.shape[1]:
        grown = np.full((members.shape[0], 2 * members.shape[1]), -1, np.int64)
        grown[:, : members.shape[1]] = members
        members = grown
    members[cid, n] = i
    slot[i] = n
    counts[cid] = n + 1
    return members


@njit(cache=True)
def _cell_remove(i, cid, members, counts, slot):
    n = counts[cid] - 1
    k = slot[i]
    last = members[cid, n]
    members[cid, k] = last
    slot[last] = k
    members[cid, n] = -1
    counts[cid] = n


@njit(cache=True)
def _cell_cross_time(x, v, c, h, ncell):
    best = INF
    code = -1
    for a in range(3):
        va = v[a]
        if va > 0.0 and c[a] < ncell - 1:
            s = ((c[a] + 1) * h - x[a]) / va
            f = 2 * a + 1
        elif va < 0.0 and c[a] > 0:
            s = (c[a] * h - x[a]) / va
            f = 2 * a
        else:
            continue
        if s < 0.0:
            s = 0.0
        if s < best:
            best = s
            code = f
    return best, code


# ---------------------------------------------------------------------------
# the event loop


@njit(cache=True)
def _position(pos, tpos, vel, i, t, out):
    dt = t - tpos[i]
    for a in range(3):
        out[a] = pos[i, a] + vel[i, a] * dt


@njit(cache=True)
def _advance(pos, tpos, vel, i, t):
    dt = t - tpos[i]
    for a in range(3):
        pos[i, a] = pos[i, a] + vel[i, a] * dt
    tpos[i] = t


@njit(cache=True)
def _predict(i, now, pos, tpos, vel, kicks, eps2, lo, hi, grazing,
             use_cells, h, ncell, cells, members, counts):
    """Earliest candidate event for particle i as (t, kind, partner, partner_stamp)."""
    xi = np.empty(3)
    xj = np.empty(3)
    _position(pos, tpos, vel, i, now, xi)
    vi = vel[i]

    s, face = wall_time(xi, vi, lo, hi)
    best = now + s if face >= 0 else INF
    kind = WALL
    partner = face
    pstamp = -1

    if use_cells:
        s, code = _cell_cross_time(xi, vi, cells[i], h, ncell)
        if code >= 0 and now + s < best:
            best = now + s
            kind = CELL
            partner = code
            pstamp = -1
        c0 = cells[i, 0]
        c1 = cells[i, 1]
        c2 = cells[i, 2]
        # collect neighbours then scan in index order so ties resolve like all-pairs
        nb = 0
        for a in range(max(c0 - 1, 0), min(c0 + 2, ncell)):
            for b in range(max(c1 - 1, 0), min(c1 + 2, ncell)):
                for c in range(max(c2 - 1, 0), min(c2 + 2, ncell)):
                    nb += counts[(a * ncell + b) * ncell + c]
        cand = np.empty(nb, np.int64)
        k = 0
        for a in range(max(c0 - 1, 0), min(c0 + 2, ncell)):
            for b in range(max(c1 - 1, 0), min(c1 + 2, ncell)):
                for c in range(max(c2 - 1, 0), min(c2 + 2, ncell)):
                    cid = (a * ncell + b) * ncell + c
                    for m in range(counts[cid]):
                        cand[k] = members[cid, m]
                        k += 1
        cand.sort()
    else:
        cand = np.arange(pos.shape[0])

    for j in cand:
        if j == i:
            continue
        _position(pos, tpos, vel, j, now, xj)
        s = pair_time(xi[0] - xj[0], xi[1] - xj[1], xi[2] - xj[2],
                      vi[0] - vel[j, 0], vi[1] - vel[j, 1], vi[2] - vel[j, 2],
                      eps2, grazing)
        if now + s < best:
            best = now + s
            kind = PAIR
            partner = j
            pstamp = kicks[j]
    return best, kind, partner, pstamp


@njit(cache=True)
def _min_gap(i, now, pos, tpos, vel, eps, use_cells, ncell, cells, members, counts):
    """Smallest |x_i - x_j| / eps over current neighbours of i."""
    xi = np.empty(3)
    xj = np.empty(3)
    _position(pos, tpos, vel, i, now, xi)
    best = INF
    n = pos.shape[0]
    if use_cells:
        c0 = cells[i, 0]
        c1 = cells[i, 1]
        c2 = cells[i, 2]
        for a in range(max(c0 - 1, 0), min(c0 + 2, ncell)):
            for b in range(max(c1 - 1, 0), min(c1 + 2, ncell)):
                for c in range(max(c2 - 1, 0), min(c2 + 2, ncell)):
                    cid = (a * ncell + b) * ncell + c
                    for m in range(counts[cid]):
                        j = members[cid, m]
                        if j == i:
                            continue
                        _position(pos, tpos, vel, j, now, xj)
                        d = math.sqrt((xi[0] - xj[0]) ** 2 + (xi[1] - xj[1]) ** 2
                                      + (xi[2] - xj[2]) ** 2) / eps
                        if d < best:
                            best = d
    else:
        for j in range(n):
            if j == i:
                continue
            _position(pos, tpos, vel, j, now, xj)
            d = math.sqrt((xi[0] - xj[0]) ** 2 + (xi[1] - xj[1]) ** 2
                          + (xi[2] - xj[2]) ** 2) / eps
            if d < best:
                best = d
    return best


@njit(cache=True)
def simulate(pos_in, vel_in, eps, box, wall_offset, t_end, sample_times, grazing,
             overlap_tol, use_cells, ncell, check_overlaps):
    """Run the event loop from t=0 to t_end.

    Centres reflect off the planes ``wall_offset`` and ``box - wall_offset``
    on each axis; the cell grid covers the whole box.

    Returns (status, diag, log_t, log_p, log_q, log_w, log_approach, snap_x,
    snap_v, counters, min_gap). ``diag`` holds (time, i, j, value) for a failure.
    """
    n = pos_in.shape[0]
    pos = pos_in.copy()
    vel = vel_in.copy()
    tpos = np.zeros(n)
    events = np.zeros(n, np.int64)  # any event of the particle: owner validity
    kicks = np.zeros(n, np.int64)   # velocity changes: partner validity
    eps2 = eps * eps
    lo = wall_offset
    hi = box - wall_offset
    diag = np.zeros(4)

    ns = sample_times.shape[0]
    snap_x = np.empty((ns, n, 3))
    snap_v = np.empty((ns, n, 3))

    cap = 1024
    log_t = np.empty(cap)
    log_p = np.empty(cap, np.int64)
    log_q = np.empty(cap, np.int64)
    log_w = np.empty((cap, 3))
    log_a = np.empty(cap)
    m = 0
    n_wall = 0
    n_cell = 0
    n_stale = 0
    min_gap = INF

    h = box / ncell
    cells = np.zeros((n, 3), np.int64)
    slot = np.zeros(n, np.int64)
    if use_cells:
        ncells = ncell * ncell * ncell
        per = max(8, 4 * (n // ncells + 1))
        members = np.full((ncells, per), -1, np.int64)
        counts = np.zeros(ncells, np.int64)
        for i in range(n):
            for a in range(3):
                c = int(math.floor(pos[i, a] / h))
                cells[i, a] = min(max(c, 0), ncell - 1)
            members = _cell_add(i, _cell_index(cells[i], ncell), members, counts, slot)
    else:
        members = np.full((1, 1), -1, np.int64)
        counts = np.zeros(1, np.int64)

    # initial overlap scan
    for i in range(n):
        g = _min_gap(i, 0.0, pos, tpos, vel, eps, use_cells, ncell, cells, members, counts)
        if g < 1.0 - overlap_tol:
            diag[0] = 0.0
            diag[1] = i
            diag[2] = -1
            diag[3] = g
            return (OVERLAP_ERROR, diag, log_t[:0].copy(), log_p[:0].copy(),
                    log_q[:0].copy(), log_w[:0].copy(), log_a[:0].copy(), snap_x[:0].copy(),
                    snap_v[:0].copy(), np.zeros(4, np.int64), min_gap)
        if g < min_gap:
            min_gap = g

    heap = [(0.0, 0, 0, 0, 0, 0)]
    heap.pop()
    for i in range(n):
        t, kind, partner, pstamp = _predict(i, 0.0, pos, tpos, vel, kicks, eps2, lo, hi,
                                            grazing, use_cells, h, ncell, cells,
                                            members, counts)
        if t < INF:
            heapq.heappush(heap, (t, kind, i, partner, events[i], pstamp))

    now = 0.0
    si = 0
    xbuf = np.empty(3)
    w = np.empty(3)
    status = OK
    while True:
        t_next = heap[0][0] if len(heap) > 0 else INF
        while si < ns and sample_times[si] <= t_next and sample_times[si] <= t_end:
            ts = sample_times[si]
            for i in range(n):
                _position(pos, tpos, vel, i, ts, xbuf)
                for a in range(3):
                    snap_x[si, i, a] = xbuf[a]
                    snap_v[si, i, a] = vel[i, a]
            si += 1
        if len(heap) == 0 or t_next > t_end:
            break
        t, kind, i, j, stamp_i, stamp_j = heapq.heappop(heap)
        if stamp_i != events[i]:
            n_stale += 1
            continue
        if t < now:
            if now - t > 1e-12:
                status = SCHEDULER_ERROR
                diag[0] = t
                diag[1] = i
                diag[2] = j
                diag[3] = now
                break
            t = now
        now = t

        if kind == PAIR and stamp_j != kicks[j]:
            # partner changed course since prediction; look again
            n_stale += 1
            tn, kn, pn, sn = _predict(i, now, pos, tpos, vel, kicks, eps2, lo, hi, grazing,
                                      use_cells, h, ncell, cells, members, counts)
            if tn < INF:
                heapq.heappush(heap, (tn, kn, i, pn, events[i], sn))
            continue

        if kind == WALL:
            _advance(pos, tpos, vel, i, now)
            a = j // 2
            pos[i, a] = hi if j % 2 == 1 else lo
            vel[i, a] = -vel[i, a]
            events[i] += 1
            kicks[i] += 1
            n_wall += 1
            if check_overlaps:
                g = _min_gap(i, now, pos, tpos, vel, eps, use_cells, ncell, cells,
                             members, counts)
                if g < min_gap:
                    min_gap = g
            tn, kn, pn, sn = _predict(i, now, pos, tpos, vel, kicks, eps2, lo, hi, grazing,
                                      use_cells, h, ncell, cells, members, counts)
            if tn < INF:
                heapq.heappush(heap, (tn, kn, i, pn, events[i], sn))
            continue

        if kind == CELL:
            a = j // 2
            old = _cell_index(cells[i], ncell)
            cells[i, a] += 1 if j % 2 == 1 else -1
            _cell_remove(i, old, members, counts, slot)
            members = _cell_add(i, _cell_index(cells[i], ncell), members, counts, slot)
            events[i] += 1
            n_cell += 1
            tn, kn, pn, sn = _predict(i, now, pos, tpos, vel, kicks, eps2, lo, hi, grazing,
                                      use_cells, h, ncell, cells, members, counts)
            if tn < INF:
                heapq.heappush(heap, (tn, kn, i, pn, events[i], sn))
            continue

        # pair collision; log it with p < q
        p = min(i, j)
        q = max(i, j)
        _advance(pos, tpos, vel, p, now)
        _advance(pos, tpos, vel, q, now)
        d2 = 0.0
        for a in range(3):
            w[a] = pos[q, a] - pos[p, a]
            d2 += w[a] * w[a]
        d = math.sqrt(d2)
        if d < eps * (1.0 - overlap_tol):
            status = OVERLAP_ERROR
            diag[0] = now
            diag[1] = p
            diag[2] = q
            diag[3] = d / eps
            break
        if d / eps < min_gap:
            min_gap = d / eps
        for a in range(3):
            w[a] = w[a] / d
        if m == log_t.shape[0]:
            cap = 2 * m
            nt = np.empty(cap)
            nt[:m] = log_t
            log_t = nt
            npp = np.empty(cap, np.int64)
            npp[:m] = log_p
            log_p = npp
            nq = np.empty(cap, np.int64)
            nq[:m] = log_q
            log_q = nq
            nw = np.empty((cap, 3))
            nw[:m] = log_w
            log_w = nw
            na = np.empty(cap)
            na[:m] = log_a
            log_a = na
        log_t[m] = now
        log_p[m] = p
        log_q[m] = q
        for a in range(3):
            log_w[m, a] = w[a]
        log_a[m] = (w[0] * (vel[p, 0] - vel[q, 0]) + w[1] * (vel[p, 1] - vel[q, 1])
                    + w[2] * (vel[p, 2] - vel[q, 2]))
        m += 1
        resolve_pair(vel[p], vel[q], w)
        events[p] += 1
        events[q] += 1
        kicks[p] += 1
        kicks[q] += 1
        if check_overlaps:
            for k in (p, q):
                g = _min_gap(k, now, pos, tpos, vel, eps, use_cells, ncell, cells,
                             members, counts)
                if g < min_gap:
                    min_gap = g
        for k in (p, q):
            tn, kn, pn, sn = _predict(k, now, pos, tpos, vel, kicks, eps2, lo, hi, grazing,
                                      use_cells, h, ncell, cells, members, counts)
            if tn < INF:
                heapq.heappush(heap, (tn, kn, k, pn, events[k], sn))

    counters = np.array([m, n_wall, n_cell, n_stale], np.int64)
    return (status, diag, log_t[:m].copy(), log_p[:m].copy(), log_q[:m].copy(),
            log_w[:m].copy(), log_a[:m].copy(), snap_x[:si].copy(), snap_v[:si].copy(),
            counters, min_gap)


# ---------------------------------------------------------------------------
# cluster kernels


@njit(cache=True)
def sweep_cluster(log_p, log_q, cut, tag, member, stamp):
    """Backward sweep over records [0, cut) for one tagged particle.

    ``member`` is a reusable int array; entries equal to ``stamp`` mark the
    current set, so no reset is needed between tags.
    """
    member[tag] = stamp
    k = 0
    for r in range(cut - 1, -1, -1):
        p = log_p[r]
        q = log_q[r]
        ip = member[p] == stamp
        iq = member[q] == stamp
        if ip and not iq:
            member[q] = stamp
            k += 1
        elif iq and not ip:
            member[p] = stamp
            k += 1
    return k


@njit(cache=True)
def sweep_all(log_p, log_q, cut, n):
    member = np.zeros(n, np.int64)
    out = np.empty(n, np.int64)
    for i in range(n):
        out[i] = sweep_cluster(log_p, log_q, cut, i, member, i + 1)
    return out


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def forward_reach(log_p, log_q, cuts, n, words_per_chunk):
    """Cluster sizes at several cutoffs via forward bitset propagation.

    Row x holds the set of particles with a time-ordered chain of collisions
    ending at x. A collision (p, q) merges rows p and q. Sources are handled in
    chunks of 64*words_per_chunk columns to bound memory. ``cuts`` must be
    nondecreasing record counts. Returns an (len(cuts), n) array of
    cardinalities excluding the particle itself.
    """
    nc = cuts.shape[0]
    out = np.zeros((nc, n), np.int64)
    total_words = (n + 63) // 64
    for w0 in range(0, total_words, words_per_chunk):
        nw = min(words_per_chunk, total_words - w0)
        rows = np.zeros((n, nw), np.uint64)
        for x in range(n):
            wd = x // 64 - w0
            if 0 <= wd < nw:
                rows[x, wd] = np.uint64(1) << np.uint64(x % 64)
        r = 0
        for c in range(nc):
            while r < cuts[c]:
                p = log_p[r]
                q = log_q[r]
                for k in range(nw):
                    u = rows[p, k] | rows[q, k]
                    rows[p, k] = u
                    rows[q, k] = u
                r += 1
            for x in range(n):
                s = 0
                for k in range(nw):
                    s += _popcount64(rows[x, k])
                out[c, x] += s
    for c in range(nc):
        for x in range(n):
            out[c, x] -= 1
    return out
