"""Numba twin of the cascade step loop.

Mirrors cascade.step exactly, including the SplitMix64 draw order, so a run
through this kernel is bit-identical to the pure-Python loop for the same
seed. Falls back to nothing when numba is unavailable; callers check
HAVE_NUMBA.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _sm64_next(s):
    s = s + np.uint64(0x9E3779B97F4A7C15)
    z = s
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return s, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _sm64_below(s, n):
    lim = np.uint64(0) - n
    while True:
        s, x = _sm64_next(s)
        r = x % n
        if x - r <= lim:
            return s, r


@njit(cache=True)
def run_kernel(rng_io, comm, d_int, d_cross, u_int, u_cross, K, active,
               total_int, owner, cls, int_start, cross_start, consumed,
               seg_off, pool_buf, pool_size, act_buf, act_size,
               pos_pool, pos_act, counters, s_int, s_cross, n_inact,
               record_every, rec, rec_count, edges, edge_count, record_edges):
    s_rng = rng_io[0]
    k = counters[0]
    last_rec = np.int64(-1)
    status = np.int64(0)

    while True:
        tot = act_size[0] + act_size[1] + act_size[2] + act_size[3]
        if k % record_every == 0 and k != last_rec:
            i = rec_count[0]
            rec[i, 0] = k
            rec[i, 1] = act_size[0]
            rec[i, 2] = act_size[1]
            rec[i, 3] = act_size[2]
            rec[i, 4] = act_size[3]
            rec[i, 5] = counters[1]
            rec[i, 6] = counters[2]
            rec[i, 7] = n_inact[0]
            rec[i, 8] = n_inact[1]
            rec_count[0] = i + 1
            last_rec = k
        if tot == 0:
            break

        s_rng, r64 = _sm64_below(s_rng, np.uint64(tot))
        r = np.int64(r64)
        c = 0
        while r >= act_size[c]:
            r -= act_size[c]
            c += 1
        stub = act_buf[seg_off[c] + r]

        # remove stub from its active list
        base = seg_off[c]
        last = act_buf[base + act_size[c] - 1]
        act_buf[base + pos_act[stub]] = last
        pos_act[last] = pos_act[stub]
        act_size[c] -= 1
        pos_act[stub] = -1
        # remove stub from its pool
        p = pos_pool[stub]
        last = pool_buf[base + pool_size[c] - 1]
        pool_buf[base + p] = last
        pos_pool[last] = p
        pool_size[c] -= 1
        consumed[stub] = 1

        if c < 2:
            pcls = c
        else:
            pcls = 5 - c
        s_rng, q64 = _sm64_below(s_rng, np.uint64(pool_size[pcls]))
        q = np.int64(q64)
        t = pool_buf[seg_off[pcls] + q]

        tbase = seg_off[pcls]
        p = pos_pool[t]
        last = pool_buf[tbase + pool_size[pcls] - 1]
        pool_buf[tbase + p] = last
        pos_pool[last] = p
        pool_size[pcls] -= 1
        consumed[t] = 1

        if pos_act[t] >= 0:
            last = act_buf[tbase + act_size[pcls] - 1]
            act_buf[tbase + pos_act[t]] = last
            pos_act[last] = pos_act[t]
            act_size[pcls] -= 1
            pos_act[t] = -1
        else:
            w = owner[t]
            j = comm[w] - 1
            if t < total_int:
                u_int[w] += 1
                s_int[j] -= 1
            else:
                u_cross[w] += 1
                s_cross[j] -= 1
            if u_int[w] + u_cross[w] >= K[w]:
                active[w] = 1
                n_inact[j] -= 1
                s_int[j] -= d_int[w] - u_int[w]
                s_cross[j] -= d_cross[w] - u_cross[w]
                for sid in range(int_start[w], int_start[w] + d_int[w]):
                    if consumed[sid] == 0:
                        sc = cls[sid]
                        act_buf[seg_off[sc] + act_size[sc]] = sid
                        pos_act[sid] = act_size[sc]
                        act_size[sc] += 1
                for sid in range(cross_start[w], cross_start[w] + d_cross[w]):
                    if consumed[sid] == 0:
                        sc = cls[sid]
                        act_buf[seg_off[sc] + act_size[sc]] = sid
                        pos_act[sid] = act_size[sc]
                        act_size[sc] += 1

        if record_edges:
            e = edge_count[0]
            edges[e, 0] = owner[stub]
            edges[e, 1] = owner[t]
            edge_count[0] = e + 1

        k += 1
        counters[0] = k
        if c < 2:
            counters[1 + c] += 1

        if (act_size[0] + s_int[0] != pool_size[0]
                or act_size[1] + s_int[1] != pool_size[1]
                or act_size[2] + s_cross[0] != pool_size[2]
                or act_size[3] + s_cross[1] != pool_size[3]):
            status = np.int64(3)
            break

    if last_rec != k:
        i = rec_count[0]
        rec[i, 0] = k
        rec[i, 1] = act_size[0]
        rec[i, 2] = act_size[1]
        rec[i, 3] = act_size[2]
        rec[i, 4] = act_size[3]
        rec[i, 5] = counters[1]
        rec[i, 6] = counters[2]
        rec[i, 7] = n_inact[0]
        rec[i, 8] = n_inact[1]
        rec_count[0] = i + 1

    rng_io[0] = s_rng
    return status
