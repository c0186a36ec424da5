"""Joint graph-generation / adoption Markov chain.

The cascade is run while the random multigraph is being built: at each step
one uniformly chosen active half-edge is matched to a uniform partner from
its pool (same-community internal stubs, or the opposite side's cross
stubs). Inactive partners lose threshold budget and may activate, releasing
their remaining stubs into the active pools. The chain stops when no active
half-edge remains; the untouched remainder of the graph is never realized
unless complete_matching is called.

Exact integer balance holds throughout: per community, active internal
stubs plus internal stubs of inactive nodes equal the remaining internal
pool, and likewise for cross stubs. These identities are checked after
every step.

Two run engines exist: a pure-Python step loop and a numba kernel. Both
consume one SplitMix64 stream in the same order, so with equal seeds they
produce identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .dist import DegreeSequences
from .errors import InvariantViolation
from .genmodel import ModelSpec, MultiGraph, alpha_grid, node_thresholds

_MASK = (1 << 64) - 1


def sm64_next(s: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns (state, 64-bit output)."""
    s = (s + 0x9E3779B97F4A7C15) & _MASK
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return s, z ^ (z >> 31)


def sm64_below(s: int, n: int) -> tuple[int, int]:
    """Unbiased draw from {0..n-1} by rejection."""
    lim = (1 << 64) - n
    while True:
        s, x = sm64_next(s)
        r = x % n
        if x - r <= lim:
            return s, r


class EventKind(IntEnum):
    WASTED_INTERNAL = 0    # two active internal stubs of one community pair up
    WASTED_CROSS = 1       # two active cross stubs pair up
    PROBE_INTERNAL = 2     # internal pairing lowers an inactive node's budget
    ACTIVATE_INTERNAL = 3  # internal pairing activates an inactive node
    PROBE_CROSS = 4
    ACTIVATE_CROSS = 5


class Event(NamedTuple):
    kind: EventKind
    community: int  # 1 or 2; 0 for WASTED_CROSS


@dataclass
class SimState:
    """Mutable cascade state owned by a single execution context."""

    model: ModelSpec
    n1: int
    n2: int
    m1: int
    m2: int
    mm: int
    # per node
    comm: np.ndarray
    d_int: np.ndarray
    d_cross: np.ndarray
    u_int: np.ndarray
    u_cross: np.ndarray
    K: np.ndarray
    active: np.ndarray
    # stub layout
    total_int: int
    owner: np.ndarray
    cls: np.ndarray
    int_start: np.ndarray
    cross_start: np.ndarray
    consumed: np.ndarray
    # pools and active lists (shared segment offsets)
    seg_off: np.ndarray
    pool_buf: np.ndarray
    pool_size: np.ndarray
    act_buf: np.ndarray
    act_size: np.ndarray
    pos_pool: np.ndarray
    pos_act: np.ndarray
    # counters
    counters: np.ndarray        # k, T1, T2
    s_int: np.ndarray           # per community: internal stubs of inactive nodes
    s_cross: np.ndarray
    n_inact: np.ndarray
    rng_state: int
    seed_count: int
    record_edges: bool
    edges: np.ndarray | None
    edge_count: int = 0

    @property
    def k(self) -> int:
        return int(self.counters[0])

    @property
    def t1(self) -> int:
        return int(self.counters[1])

    @property
    def t2(self) -> int:
        return int(self.counters[2])

    def active_stub_total(self) -> int:
        return int(self.act_size.sum())

    def snapshot_row(self) -> np.ndarray:
        return np.array([self.k,
                         self.act_size[0], self.act_size[1],
                         self.act_size[2], self.act_size[3],
                         self.counters[1], self.counters[2],
                         self.n_inact[0], self.n_inact[1]], dtype=np.int64)

    def check_balance(self, full: bool = False) -> None:
        """Exact integer balance of stub accounting.

        With full=True the inactive-node stub sums are recomputed from the
        node records instead of the running counters.
        """
        if full:
            s_int = np.zeros(2, dtype=np.int64)
            s_cross = np.zeros(2, dtype=np.int64)
            for j in (0, 1):
                mask = (self.active == 0) & (self.comm == j + 1)
                s_int[j] = int((self.d_int - self.u_int)[mask].sum())
                s_cross[j] = int((self.d_cross - self.u_cross)[mask].sum())
            if not (np.array_equal(s_int, self.s_int) and np.array_equal(s_cross, self.s_cross)):
                raise InvariantViolation("inactive stub counters drifted from node records")
        for j in (0, 1):
            if int(self.act_size[j]) + int(self.s_int[j]) != int(self.pool_size[j]):
                raise InvariantViolation(f"internal balance violated in community {j + 1}")
            if int(self.act_size[2 + j]) + int(self.s_cross[j]) != int(self.pool_size[2 + j]):
                raise InvariantViolation(f"cross balance violated on side {j + 1}")
        crossed = self.k - self.t1 - self.t2
        if int(self.pool_size[2]) != self.mm - crossed or int(self.pool_size[3]) != self.mm - crossed:
            raise InvariantViolation("cross pool size inconsistent with step clock")
        if int(self.pool_size[0]) != 2 * self.m1 - 2 * self.t1:
            raise InvariantViolation("internal pool size inconsistent with clock T1")
        if int(self.pool_size[1]) != 2 * self.m2 - 2 * self.t2:
            raise InvariantViolation("internal pool size inconsistent with clock T2")


def initialize_simulation(model: ModelSpec, seqs: DegreeSequences,
                          rng: np.random.Generator, *,
                          exact_seed_count: int | None = None,
                          record_edges: bool = False) -> SimState:
    """Seed nodes, place stubs in pools, and derive the simulation stream.

    Nodes are seeded independently with their rule's probability, or, when
    exact_seed_count is given, by drawing exactly that many nodes uniformly
    without replacement. Nodes whose threshold is <= 0 start active either
    way.
    """
    seqs.check()
    n1, n2 = model.n1, model.n2
    if len(seqs.internal1) != n1 or len(seqs.internal2) != n2:
        raise ValueError("sequence lengths do not match community sizes")
    n = n1 + n2
    comm = np.concatenate([np.ones(n1, dtype=np.int8), np.full(n2, 2, dtype=np.int8)])
    d_int = np.concatenate([seqs.internal1, seqs.internal2]).astype(np.int64)
    d_cross = np.concatenate([seqs.cross1, seqs.cross2]).astype(np.int64)
    K = node_thresholds(model, comm, d_int, d_cross)

    if exact_seed_count is None:
        a1 = alpha_grid(model.seeding, model, 1, int(seqs.internal1.max()),
                        int(seqs.cross1.max()))
        a2 = alpha_grid(model.seeding, model, 2, int(seqs.internal2.max()),
                        int(seqs.cross2.max()))
        alpha = np.empty(n)
        alpha[:n1] = a1[seqs.internal1, seqs.cross1]
        alpha[n1:] = a2[seqs.internal2, seqs.cross2]
        seeds = rng.random(n) < alpha
    else:
        seeds = np.zeros(n, dtype=bool)
        if exact_seed_count > 0:
            seeds[rng.choice(n, size=exact_seed_count, replace=False)] = True
    seed_count = int(seeds.sum())
    active = (seeds | (K <= 0.0)).astype(np.uint8)

    total_int = int(d_int.sum())
    total = total_int + int(d_cross.sum())
    owner = np.concatenate([np.repeat(np.arange(n, dtype=np.int64), d_int),
                            np.repeat(np.arange(n, dtype=np.int64), d_cross)])
    cls = np.empty(total, dtype=np.int8)
    cls[:total_int] = comm[owner[:total_int]] - 1
    cls[total_int:] = comm[owner[total_int:]] + 1
    int_start = np.concatenate([[0], np.cumsum(d_int)[:-1]]).astype(np.int64)
    cross_start = (total_int + np.concatenate([[0], np.cumsum(d_cross)[:-1]])).astype(np.int64)

    seg_sizes = np.array([2 * seqs.m1, 2 * seqs.m2, seqs.mm, seqs.mm], dtype=np.int64)
    seg_off = np.concatenate([[0], np.cumsum(seg_sizes)]).astype(np.int64)
    pool_buf = np.empty(total, dtype=np.int64)
    pos_pool = np.empty(total, dtype=np.int64)
    stub_ids = np.arange(total, dtype=np.int64)
    for c in range(4):
        members = stub_ids[cls == c]
        pool_buf[seg_off[c]:seg_off[c] + members.size] = members
        pos_pool[members] = np.arange(members.size)
    pool_size = seg_sizes.copy()

    act_buf = np.empty(total, dtype=np.int64)
    act_size = np.zeros(4, dtype=np.int64)
    pos_act = np.full(total, -1, dtype=np.int64)
    for c in range(4):
        members = stub_ids[(cls == c) & (active[owner] == 1)]
        act_buf[seg_off[c]:seg_off[c] + members.size] = members
        pos_act[members] = np.arange(members.size)
        act_size[c] = members.size

    s_int = np.zeros(2, dtype=np.int64)
    s_cross = np.zeros(2, dtype=np.int64)
    n_inact = np.zeros(2, dtype=np.int64)
    for j in (0, 1):
        mask = (active == 0) & (comm == j + 1)
        s_int[j] = int(d_int[mask].sum())
        s_cross[j] = int(d_cross[mask].sum())
        n_inact[j] = int(mask.sum())

    state = SimState(
        model=model, n1=n1, n2=n2, m1=seqs.m1, m2=seqs.m2, mm=seqs.mm,
        comm=comm, d_int=d_int, d_cross=d_cross,
        u_int=np.zeros(n, dtype=np.int64), u_cross=np.zeros(n, dtype=np.int64),
        K=K, active=active,
        total_int=total_int, owner=owner, cls=cls,
        int_start=int_start, cross_start=cross_start,
        consumed=np.zeros(total, dtype=np.uint8),
        seg_off=seg_off, pool_buf=pool_buf, pool_size=pool_size,
        act_buf=act_buf, act_size=act_size,
        pos_pool=pos_pool, pos_act=pos_act,
        counters=np.zeros(3, dtype=np.int64),
        s_int=s_int, s_cross=s_cross, n_inact=n_inact,
        rng_state=int(rng.integers(0, 1 << 64, dtype=np.uint64)),
        seed_count=seed_count,
        record_edges=record_edges,
        edges=np.empty((seqs.m1 + seqs.m2 + seqs.mm, 2), dtype=np.int64) if record_edges else None,
    )
    state.check_balance(full=True)
    return state


def _pool_remove(st: SimState, stub: int) -> None:
    c = st.cls[stub]
    base = st.seg_off[c]
    pos = st.pos_pool[stub]
    last = st.pool_buf[base + st.pool_size[c] - 1]
    st.pool_buf[base + pos] = last
    st.pos_pool[last] = pos
    st.pool_size[c] -= 1


def _act_remove(st: SimState, stub: int) -> None:
    c = st.cls[stub]
    base = st.seg_off[c]
    pos = st.pos_act[stub]
    last = st.act_buf[base + st.act_size[c] - 1]
    st.act_buf[base + pos] = last
    st.pos_act[last] = pos
    st.act_size[c] -= 1
    st.pos_act[stub] = -1


def _act_append(st: SimState, stub: int) -> None:
    c = st.cls[stub]
    st.act_buf[st.seg_off[c] + st.act_size[c]] = stub
    st.pos_act[stub] = st.act_size[c]
    st.act_size[c] += 1


def step(state: SimState) -> Event:
    """One matching step; requires at least one active half-edge."""
    st = state
    tot = int(st.act_size.sum())
    if tot == 0:
        raise InvariantViolation("step called with no active half-edges")

    st.rng_state, r = sm64_below(st.rng_state, tot)
    c = 0
    while r >= st.act_size[c]:
        r -= int(st.act_size[c])
        c += 1
    s = int(st.act_buf[st.seg_off[c] + r])

    _act_remove(st, s)
    _pool_remove(st, s)
    st.consumed[s] = 1

    if c < 2:
        partner_cls = c
    else:
        partner_cls = 2 + (1 - (c - 2))
    psize = int(st.pool_size[partner_cls])
    st.rng_state, q = sm64_below(st.rng_state, psize)
    t = int(st.pool_buf[st.seg_off[partner_cls] + q])

    _pool_remove(st, t)
    st.consumed[t] = 1

    if st.pos_act[t] >= 0:
        _act_remove(st, t)
        event = Event(EventKind.WASTED_INTERNAL, c + 1) if c < 2 else Event(EventKind.WASTED_CROSS, 0)
    else:
        w = int(st.owner[t])
        j = int(st.comm[w]) - 1
        if t < st.total_int:
            st.u_int[w] += 1
            st.s_int[j] -= 1
        else:
            st.u_cross[w] += 1
            st.s_cross[j] -= 1
        if st.u_int[w] + st.u_cross[w] >= st.K[w]:
            st.active[w] = 1
            st.n_inact[j] -= 1
            st.s_int[j] -= int(st.d_int[w] - st.u_int[w])
            st.s_cross[j] -= int(st.d_cross[w] - st.u_cross[w])
            for sid in range(st.int_start[w], st.int_start[w] + st.d_int[w]):
                if not st.consumed[sid]:
                    _act_append(st, sid)
            for sid in range(st.cross_start[w], st.cross_start[w] + st.d_cross[w]):
                if not st.consumed[sid]:
                    _act_append(st, sid)
            kind = EventKind.ACTIVATE_INTERNAL if c < 2 else EventKind.ACTIVATE_CROSS
        else:
            kind = EventKind.PROBE_INTERNAL if c < 2 else EventKind.PROBE_CROSS
        event = Event(kind, j + 1)

    if st.record_edges:
        st.edges[st.edge_count, 0] = st.owner[s]
        st.edges[st.edge_count, 1] = st.owner[t]
        st.edge_count += 1

    st.counters[0] += 1
    if c < 2:
        st.counters[1 + c] += 1
    st.check_balance()
    return event


@dataclass
class SimResult:
    """Outcome of one cascade run."""

    final_active: tuple[int, int]
    final_fraction: tuple[float, float]
    path: np.ndarray            # int64 rows: k, A1, A2, Am1, Am2, T1, T2, inact1, inact2
    n1: int
    n2: int
    m1: int
    m2: int
    mm: int
    steps: int
    seed_count: int
    engine: str
    edges: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def path_scaled(self, unit: str = "total") -> np.ndarray:
        """Float path rows: k_over_n, a1, a2, am1, am2, tau1, tau2, phi1, phi2.

        unit="total" divides counts by n1+n2; unit="community" divides by n1
        (requires n1 == n2) which matches the ODE observables directly. The
        inactive fractions are always per community.
        """
        if unit == "total":
            scale = float(self.n)
        elif unit == "community":
            if self.n1 != self.n2:
                raise ValueError("community scaling requires n1 == n2")
            scale = float(self.n1)
        else:
            raise ValueError(f"unknown unit {unit!r}")
        p = self.path.astype(float)
        out = np.empty((p.shape[0], 9))
        out[:, 0] = p[:, 0] / scale
        out[:, 1:7] = p[:, 1:7] / scale
        out[:, 7] = p[:, 7] / self.n1
        out[:, 8] = p[:, 8] / self.n2
        return out


def run(state: SimState, record_every: int = 1000, engine: str = "auto",
        full_balance_checks: bool = True) -> SimResult:
    """Drive the chain until no active half-edge remains.

    engine: "numba" (fast kernel), "python" (step loop), or "auto". Both
    engines draw from the state's SplitMix64 stream in the same order and
    yield identical results for identical seeds.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if engine == "auto":
        from . import _kernel
        engine = "numba" if _kernel.HAVE_NUMBA else "python"

    if engine == "numba":
        rows, status = _run_numba(state, record_every)
    elif engine == "python":
        rows, status = _run_python(state, record_every)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if status != 0:
        raise InvariantViolation("balance equations violated during run")
    if full_balance_checks:
        state.check_balance(full=True)

    act1 = state.n1 - int(state.n_inact[0])
    act2 = state.n2 - int(state.n_inact[1])
    return SimResult(
        final_active=(act1, act2),
        final_fraction=(act1 / state.n1, act2 / state.n2),
        path=rows,
        n1=state.n1, n2=state.n2, m1=state.m1, m2=state.m2, mm=state.mm,
        steps=state.k,
        seed_count=state.seed_count,
        engine=engine,
        edges=state.edges[:state.edge_count].copy() if state.record_edges else None,
    )


def _run_python(state: SimState, record_every: int):
    rows = [state.snapshot_row()]
    while state.active_stub_total() > 0:
        step(state)
        if state.k % record_every == 0:
            rows.append(state.snapshot_row())
    if int(rows[-1][0]) != state.k:
        rows.append(state.snapshot_row())
    return np.vstack(rows), 0


def _run_numba(state: SimState, record_every: int):
    from ._kernel import run_kernel

    st = state
    max_rows = (st.m1 + st.m2 + st.mm) // record_every + 3
    rec = np.zeros((max_rows, 9), dtype=np.int64)
    rec_count = np.zeros(1, dtype=np.int64)
    rng_io = np.array([st.rng_state], dtype=np.uint64)
    edges = st.edges if st.record_edges else np.empty((0, 2), dtype=np.int64)
    edge_count = np.array([st.edge_count], dtype=np.int64)
    status = run_kernel(
        rng_io, st.comm, st.d_int, st.d_cross, st.u_int, st.u_cross, st.K,
        st.active, np.int64(st.total_int), st.owner, st.cls,
        st.int_start, st.cross_start,
        st.consumed, st.seg_off, st.pool_buf, st.pool_size,
        st.act_buf, st.act_size, st.pos_pool, st.pos_act,
        st.counters, st.s_int, st.s_cross, st.n_inact,
        np.int64(record_every), rec, rec_count,
        edges, edge_count, st.record_edges,
    )
    st.rng_state = int(rng_io[0])
    st.edge_count = int(edge_count[0])
    return rec[:int(rec_count[0])].copy(), int(status)


# --------------------------------------------------------------------------
# oracles on explicit graphs
# --------------------------------------------------------------------------

def threshold_closure(graph: MultiGraph, thresholds: np.ndarray, seeds) -> set[int]:
    """Least fixed point of the monotone activation map.

    Repeatedly activates any node whose count of active neighbors (with
    edge multiplicity, self-loops ignored) reaches its threshold. The
    result does not depend on processing order.
    """
    n = graph.n
    heads = [[] for _ in range(n)]
    for u, v in graph.edges:
        if u == v:
            continue
        heads[u].append(int(v))
        heads[v].append(int(u))
    active = np.zeros(n, dtype=bool)
    count = np.zeros(n, dtype=np.int64)
    stack = [int(v) for v in seeds]
    stack.extend(int(v) for v in np.flatnonzero(thresholds <= 0.0))
    while stack:
        v = stack.pop()
        if active[v]:
            continue
        active[v] = True
        for u in heads[v]:
            count[u] += 1
            if not active[u] and count[u] >= thresholds[u]:
                stack.append(u)
    return set(np.flatnonzero(active).tolist())


def complete_matching(state: SimState, rng: np.random.Generator) -> MultiGraph:
    """Pair all leftover stubs and return the full multigraph.

    Requires a finished run with edge recording enabled; the union of the
    run's pairings and this completion is a configuration-model multigraph
    consistent with the degree sequences.
    """
    if state.active_stub_total() != 0:
        raise InvariantViolation("complete_matching requires a finished run")
    if not state.record_edges:
        raise ValueError("run was not recording edges")
    parts = [state.edges[:state.edge_count]]
    for c in (0, 1):
        size = int(state.pool_size[c])
        if size % 2 != 0:
            raise InvariantViolation("odd residual internal pool")
        if size:
            stubs = state.pool_buf[state.seg_off[c]:state.seg_off[c] + size]
            pairs = stubs[rng.permutation(size)].reshape(-1, 2)
            parts.append(state.owner[pairs])
    s1 = int(state.pool_size[2])
    s2 = int(state.pool_size[3])
    if s1 != s2:
        raise InvariantViolation("unbalanced residual cross pools")
    if s1:
        a = state.pool_buf[state.seg_off[2]:state.seg_off[2] + s1]
        b = state.pool_buf[state.seg_off[3]:state.seg_off[3] + s2]
        pairs = np.column_stack([a, b[rng.permutation(s2)]])
        parts.append(state.owner[pairs])
    edges = np.vstack([p for p in parts if len(p)]) if any(len(p) for p in parts) else np.empty((0, 2), dtype=np.int64)
    graph = MultiGraph(n=state.n1 + state.n2, community=state.comm,
                       d_internal=state.d_int, d_cross=state.d_cross,
                       edges=edges.astype(np.int64))
    graph.check()
    return graph
