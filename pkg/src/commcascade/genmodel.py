"""Model specification: thresholds, seeding rules, and full-graph realization.

A node's threshold K and seeding probability alpha are deterministic
functions of its community and its realized (internal, cross) degree pair.
K is real-valued and compared strictly: a node stays inactive while its
count of consumed-by-active stubs is < K, so K <= 0 means active from the
start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .dist import DegreeDistribution


# --------------------------------------------------------------------------
# threshold rules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearThreshold:
    """K(d_same, d_cross) = theta * (d_same + d_cross), same rule both sides."""

    theta: float

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0,1), got {self.theta}")

    def value(self, community: int, d_same: int, d_cross: int) -> float:
        return self.theta * (d_same + d_cross)

    def depends_on_total_only(self, community: int) -> bool:
        return True

    def mirror_symmetric(self) -> bool:
        return True


@dataclass(frozen=True)
class TableThreshold:
    """Explicit thresholds keyed by (d_same, d_cross, community)."""

    entries: Mapping[tuple[int, int, int], float]

    def __post_init__(self):
        frozen = {}
        for (ds, dc, comm), k in dict(self.entries).items():
            k = float(k)
            if not (0.0 <= k <= ds + dc):
                raise ValueError(f"threshold {k} outside [0, {ds + dc}] for degrees ({ds},{dc})")
            frozen[(int(ds), int(dc), int(comm))] = k
        object.__setattr__(self, "entries", frozen)

    def value(self, community: int, d_same: int, d_cross: int) -> float:
        try:
            return self.entries[(d_same, d_cross, community)]
        except KeyError:
            raise ValueError(f"no threshold entry for degrees ({d_same},{d_cross}) in community {community}") from None

    def depends_on_total_only(self, community: int) -> bool:
        by_total: dict[int, float] = {}
        for (ds, dc, comm), k in self.entries.items():
            if comm != community:
                continue
            if by_total.setdefault(ds + dc, k) != k:
                return False
        return True

    def mirror_symmetric(self) -> bool:
        for (ds, dc, comm), k in self.entries.items():
            other = self.entries.get((ds, dc, 3 - comm))
            if other is None or other != k:
                return False
        return True


# --------------------------------------------------------------------------
# seeding rules
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GlobalSeeding:
    """Every node is a seed with the same probability."""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0,1], got {self.alpha}")


@dataclass(frozen=True)
class PerCommunitySeeding:
    alpha1: float
    alpha2: float

    def __post_init__(self):
        for a in (self.alpha1, self.alpha2):
            if not (0.0 <= a <= 1.0):
                raise ValueError(f"alpha must lie in [0,1], got {a}")


@dataclass(frozen=True)
class DegreeTargetedSeeding:
    """Spend a population budget on the highest-total-degree nodes.

    budget1/budget2 are fractions of the TOTAL population seeded inside
    community 1/2. Within a community the rule seeds all nodes with total
    degree above a cutoff, a fraction of the nodes exactly at the cutoff
    (chosen so the expected seeded count matches the budget), and nobody
    below it.
    """

    budget1: float
    budget2: float

    def __post_init__(self):
        for b in (self.budget1, self.budget2):
            if not (0.0 <= b <= 1.0):
                raise ValueError(f"budget must lie in [0,1], got {b}")
        if self.budget1 + self.budget2 > 1.0 + 1e-12:
            raise ValueError("budgets sum above 1")


@dataclass(frozen=True)
class CustomSeeding:
    """alpha = fn(community, d_same, d_cross); fn must return values in [0,1]."""

    fn: Callable[[int, int, int], float]


SeedingRule = GlobalSeeding | PerCommunitySeeding | DegreeTargetedSeeding | CustomSeeding
ThresholdRule = LinearThreshold | TableThreshold


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelSpec:
    """The full two-community model. Immutable and shareable."""

    p1: DegreeDistribution
    p2: DegreeDistribution
    pm: DegreeDistribution
    n1: int
    n2: int
    threshold: ThresholdRule
    seeding: SeedingRule

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("community sizes must be at least 1")

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def internal_dist(self, community: int) -> DegreeDistribution:
        return self.p1 if community == 1 else self.p2

    def community_size(self, community: int) -> int:
        return self.n1 if community == 1 else self.n2


def total_degree_law(model: ModelSpec, community: int) -> np.ndarray:
    """pmf of d_internal + d_cross for a node of the given community."""
    return np.convolve(model.internal_dist(community).pmf, model.pm.pmf)


def targeted_cutoff(total_pmf: np.ndarray, target: float) -> tuple[int, float]:
    """Top-degree cutoff exhausting an expected within-community fraction.

    Returns (dstar, frac): seed degrees > dstar with probability 1, degree
    dstar with probability frac, lower degrees never. Computed by scanning
    cumulative tail mass from the top.
    """
    if target <= 0.0:
        return len(total_pmf), 0.0
    if target >= 1.0:
        return -1, 0.0
    tail = 0.0
    for d in range(len(total_pmf) - 1, -1, -1):
        new_tail = tail + total_pmf[d]
        if new_tail >= target:
            frac = (target - tail) / total_pmf[d] if total_pmf[d] > 0 else 0.0
            return d, float(frac)
        tail = new_tail
    return -1, 0.0


def alpha_of(seeding: SeedingRule, model: ModelSpec, community: int,
             d_same: int, d_cross: int) -> float:
    """Seeding probability of one node type."""
    if community not in (1, 2):
        raise ValueError(f"community must be 1 or 2, got {community}")
    if isinstance(seeding, GlobalSeeding):
        return seeding.alpha
    if isinstance(seeding, PerCommunitySeeding):
        return seeding.alpha1 if community == 1 else seeding.alpha2
    if isinstance(seeding, DegreeTargetedSeeding):
        budget = seeding.budget1 if community == 1 else seeding.budget2
        target = budget * model.n / model.community_size(community)
        if target > 1.0 + 1e-12:
            raise ValueError(f"budget exceeds community {community} population")
        dstar, frac = targeted_cutoff(total_degree_law(model, community), min(target, 1.0))
        d = d_same + d_cross
        if d > dstar:
            return 1.0
        if d == dstar:
            return frac
        return 0.0
    if isinstance(seeding, CustomSeeding):
        a = float(seeding.fn(community, d_same, d_cross))
        if not (0.0 <= a <= 1.0):
            raise ValueError(f"custom seeding returned {a}, outside [0,1]")
        return a
    raise TypeError(f"unknown seeding rule {seeding!r}")


def alpha_grid(seeding: SeedingRule, model: ModelSpec, community: int,
               dmax_same: int, dmax_cross: int) -> np.ndarray:
    """alpha over the (d_same, d_cross) grid, shape (dmax_same+1, dmax_cross+1)."""
    grid = np.empty((dmax_same + 1, dmax_cross + 1))
    if isinstance(seeding, DegreeTargetedSeeding):
        budget = seeding.budget1 if community == 1 else seeding.budget2
        target = budget * model.n / model.community_size(community)
        if target > 1.0 + 1e-12:
            raise ValueError(f"budget exceeds community {community} population")
        dstar, frac = targeted_cutoff(total_degree_law(model, community), min(target, 1.0))
        total = np.arange(dmax_same + 1)[:, None] + np.arange(dmax_cross + 1)[None, :]
        grid = np.where(total > dstar, 1.0, np.where(total == dstar, frac, 0.0))
        return grid
    for ds in range(dmax_same + 1):
        for dc in range(dmax_cross + 1):
            grid[ds, dc] = alpha_of(seeding, model, community, ds, dc)
    return grid


# --------------------------------------------------------------------------
# explicit multigraphs
# --------------------------------------------------------------------------

@dataclass
class MultiGraph:
    """Edge list with per-node communities and declared degrees.

    Self-loops and parallel edges are allowed. Internal edges join nodes of
    one community, cross edges join opposite communities.
    """

    n: int
    community: np.ndarray
    d_internal: np.ndarray
    d_cross: np.ndarray
    edges: np.ndarray  # shape (m, 2)

    def check(self) -> None:
        internal = np.zeros(self.n, dtype=np.int64)
        cross = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            if self.community[u] == self.community[v]:
                internal[u] += 1
                internal[v] += 1
            else:
                cross[u] += 1
                cross[v] += 1
        if not np.array_equal(internal, self.d_internal):
            raise ValueError("internal incident counts do not match declared degrees")
        if not np.array_equal(cross, self.d_cross):
            raise ValueError("cross incident counts do not match declared degrees")


def _match_within(stubs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform perfect matching: shuffle stubs, pair consecutive entries."""
    order = rng.permutation(stubs.size)
    shuffled = stubs[order]
    return shuffled.reshape(-1, 2)


def realize_full_graph(seqs, community_sizes: tuple[int, int],
                       rng: np.random.Generator) -> MultiGraph:
    """Match every stub of a degree-sequence realization into edges."""
    seqs.check()
    n1, n2 = community_sizes
    n = n1 + n2
    community = np.concatenate([np.ones(n1, dtype=np.int8), np.full(n2, 2, dtype=np.int8)])
    d_int = np.concatenate([seqs.internal1, seqs.internal2]).astype(np.int64)
    d_cross = np.concatenate([seqs.cross1, seqs.cross2]).astype(np.int64)

    edges = []
    stubs1 = np.repeat(np.arange(n1), seqs.internal1)
    if stubs1.size:
        edges.append(_match_within(stubs1, rng))
    stubs2 = np.repeat(np.arange(n1, n), seqs.internal2)
    if stubs2.size:
        edges.append(_match_within(stubs2, rng))
    cstubs1 = np.repeat(np.arange(n1), seqs.cross1)
    cstubs2 = np.repeat(np.arange(n1, n), seqs.cross2)
    if cstubs1.size:
        perm = rng.permutation(cstubs2.size)
        edges.append(np.column_stack([cstubs1, cstubs2[perm]]))

    all_edges = np.concatenate(edges) if edges else np.empty((0, 2), dtype=np.int64)
    return MultiGraph(n=n, community=community, d_internal=d_int,
                      d_cross=d_cross, edges=all_edges.astype(np.int64))


def node_thresholds(model: ModelSpec, community: np.ndarray,
                    d_internal: np.ndarray, d_cross: np.ndarray) -> np.ndarray:
    rule = model.threshold
    if isinstance(rule, LinearThreshold):
        return rule.theta * (d_internal + d_cross).astype(float)
    out = np.empty(len(community))
    for i in range(len(community)):
        out[i] = rule.value(int(community[i]), int(d_internal[i]), int(d_cross[i]))
    return out
