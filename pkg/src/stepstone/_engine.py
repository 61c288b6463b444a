"""Compiled inner loops.

Everything here works on plain arrays; the public modules wrap these in
dataclasses.  Kernels are passed as ``(offsets, cum, uniform)`` where
``offsets`` is (m, 2) int64, ``cum`` the cumulative probabilities and
``uniform`` says all m entries are equally likely.
"""
import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def draw_index(rng, cum, uniform):
    m = cum.shape[0]
    u = rng.random()
    if uniform:
        i = int(u * m)
        return i if i < m else m - 1
    lo = 0
    hi = m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def wrap1(v, L):
    y = v % L
    if 2 * y > L:
        y -= L
    return y


@njit(cache=True)
def _exp(rng):
    return -np.log(1.0 - rng.random())


@njit(cache=True)
def genealogy(rng, L, slots, nu, offsets, cum, uniform, x0, y0, s0, horizon, min_k, trace_cap):
    """Backward Moran coalescing walk for n lineages.

    Returns merge arrays plus an optional per-event trace with columns
    (node, dx, dy, landed_in_occupied_colony, merged).  Stops once ``min_k``
    lineages remain or the horizon passes.
    """
    n = x0.shape[0]
    x = x0.copy()
    y = y0.copy()
    s = s0.copy()
    node = np.arange(n)
    mt = np.empty(max(n - 1, 0))
    mch = np.empty((max(n - 1, 0), 2), dtype=np.int64)
    mpos = np.empty((max(n - 1, 0), 3), dtype=np.int64)
    trace = np.zeros((trace_cap, 5), dtype=np.int64)
    nm = 0
    nev = 0
    k = n
    t = 0.0
    while k > min_k:
        t += _exp(rng) / k
        if t > horizon:
            break
        i = int(rng.random() * k)
        if i >= k:
            i = k - 1
        dx = 0
        dy = 0
        if rng.random() < nu:
            j = draw_index(rng, cum, uniform)
            dx = offsets[j, 0]
            dy = offsets[j, 1]
        nx = wrap1(x[i] + dx, L)
        ny = wrap1(y[i] + dy, L)
        ns = int(rng.random() * slots)
        if ns >= slots:
            ns = slots - 1
        partner = -1
        cocol = 0
        for j in range(k):
            if j != i and x[j] == nx and y[j] == ny:
                cocol = 1
                if s[j] == ns:
                    partner = j
                    break
        if nev < trace_cap:
            trace[nev, 0] = node[i]
            trace[nev, 1] = dx
            trace[nev, 2] = dy
            trace[nev, 3] = cocol
            trace[nev, 4] = 1 if partner >= 0 else 0
        nev += 1
        if partner >= 0:
            a = node[i]
            b = node[partner]
            mt[nm] = t
            mch[nm, 0] = min(a, b)
            mch[nm, 1] = max(a, b)
            mpos[nm, 0] = nx
            mpos[nm, 1] = ny
            mpos[nm, 2] = ns
            node[partner] = n + nm
            nm += 1
            k -= 1
            x[i] = x[k]
            y[i] = y[k]
            s[i] = s[k]
            node[i] = node[k]
        else:
            x[i] = nx
            y[i] = ny
            s[i] = ns
    return mt[:nm], mch[:nm], mpos[:nm], nev, trace[:min(nev, trace_cap)]


@njit(cache=True)
def _parent(rng, L, slots, nu, offsets, cum, uniform, px, py):
    dx = 0
    dy = 0
    if rng.random() < nu:
        j = draw_index(rng, cum, uniform)
        dx = offsets[j, 0]
        dy = offsets[j, 1]
    ns = int(rng.random() * slots)
    if ns >= slots:
        ns = slots - 1
    return wrap1(px + dx, L), wrap1(py + dy, L), ns


@njit(cache=True)
def _settle(idx, k, x, y, s, mask, t, t0):
    """Merge lineage ``idx`` into any lineage sharing its slot; return new k."""
    for j in range(k):
        if j != idx and x[j] == x[idx] and y[j] == y[idx] and s[j] == s[idx]:
            common = mask[j] & mask[idx]
            if common & 1 and t0[0] == INF:
                t0[0] = t
            if common & 2 and t0[1] == INF:
                t0[1] = t
            mask[j] |= mask[idx]
            k -= 1
            x[idx] = x[k]
            y[idx] = y[k]
            s[idx] = s[k]
            mask[idx] = mask[k]
            return k
    return k


@njit(cache=True)
def two_locus(rng, L, slots, nu, offsets, cum, uniform, x0, y0, s0, r, horizon, stop_at_decision):
    """Two sampled chromosomes, loci a (bit 1) and b (bit 2).

    Returns (t0_a, t0_b, first_recomb_time, nrbc_flag, jumps, events) where
    nrbc_flag is 1 for no recombination before joint coalescence, 0 for a
    recombination first, -1 if undecided by the horizon.
    """
    x = np.empty(4, dtype=np.int64)
    y = np.empty(4, dtype=np.int64)
    s = np.empty(4, dtype=np.int64)
    mask = np.empty(4, dtype=np.int64)
    for i in range(2):
        x[i] = x0[i]
        y[i] = y0[i]
        s[i] = s0[i]
        mask[i] = 3
    t0 = np.array([INF, INF])
    k = 2
    t = 0.0
    first_rec = INF
    jumps = 0
    events = 0
    nrbc = -1
    while t0[0] == INF or t0[1] == INF:
        t += _exp(rng) / k
        if t > horizon:
            break
        i = int(rng.random() * k)
        if i >= k:
            i = k - 1
        events += 1
        if mask[i] == 3:
            jumps += 1
            if r > 0.0 and rng.random() < r:
                if first_rec == INF:
                    first_rec = t
                    if nrbc == -1:
                        nrbc = 0
                    if stop_at_decision:
                        break
                ax, ay, a_s = _parent(rng, L, slots, nu, offsets, cum, uniform, x[i], y[i])
                bx, by, b_s = _parent(rng, L, slots, nu, offsets, cum, uniform, x[i], y[i])
                x[i] = ax
                y[i] = ay
                s[i] = a_s
                mask[i] = 1
                x[k] = bx
                y[k] = by
                s[k] = b_s
                mask[k] = 2
                k += 1
                k = _settle(k - 1, k, x, y, s, mask, t, t0)
                k = _settle(i, k, x, y, s, mask, t, t0)
                continue
        px, py, ps = _parent(rng, L, slots, nu, offsets, cum, uniform, x[i], y[i])
        x[i] = px
        y[i] = py
        s[i] = ps
        k = _settle(i, k, x, y, s, mask, t, t0)
        if nrbc == -1 and t0[0] < INF and t0[1] < INF:
            nrbc = 1
            if stop_at_decision:
                break
    return t0[0], t0[1], first_rec, nrbc, jumps, events


@njit(cache=True)
def first_hit_step(rng, offsets, cum, uniform, sx, sy, max_steps, L):
    """Index (1-based) of the first jump landing on the origin, or -1.

    ``L == 0`` means the plane; otherwise positions are wrapped on the torus.
    """
    m = cum.shape[0]
    nbits = 0
    while (1 << nbits) < m:
        nbits += 1
    # uniform kernels with 2^nbits entries take their index straight from random bits
    use_bits = uniform and (1 << nbits) == m and nbits > 0
    per_word = 52 // nbits if use_bits else 0
    mask = (1 << nbits) - 1
    word = 0
    left = 0
    px = sx
    py = sy
    for step in range(1, max_steps + 1):
        if use_bits:
            if left == 0:
                word = int(rng.random() * 4503599627370496.0)
                left = per_word
            j = word & mask
            word >>= nbits
            left -= 1
        else:
            j = draw_index(rng, cum, uniform)
        px += offsets[j, 0]
        py += offsets[j, 1]
        if L > 0:
            px = wrap1(px, L)
            py = wrap1(py, L)
        if px == 0 and py == 0:
            return step
    return -1


@njit(cache=True)
def forward_moran(rng, labels, L, slots, nu, offsets, cum, uniform, n_events):
    """Apply ``n_events`` uniformly placed replacement events in place.

    ``labels`` has shape (L, L, slots) indexed by coordinates mod L.
    """
    total = L * L * slots
    for _ in range(n_events):
        c = int(rng.random() * total)
        if c >= total:
            c = total - 1
        i = c // (L * slots)
        j = (c // slots) % L
        k = c % slots
        di = i
        dj = j
        if rng.random() < nu:
            m = draw_index(rng, cum, uniform)
            di = (i + offsets[m, 0]) % L
            dj = (j + offsets[m, 1]) % L
        ds = int(rng.random() * slots)
        if ds >= slots:
            ds = slots - 1
        labels[i, j, k] = labels[di, dj, ds]
