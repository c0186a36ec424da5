"""Degree distributions and degree-sequence sampling.

Distributions are finitely supported: Poisson laws are truncated at the
smallest cap whose residual tail mass is below ``tail_tol`` and then
renormalized, so every downstream sum is finite. The truncation tolerance
(default 1e-12) sits far below every tolerance used elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TAIL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """A pmf on 0..dmax with its mean.

    kind is one of "poisson", "regular", "table"; param carries the Poisson
    rate or the regular degree (None for tables). Instances are immutable
    and safe to share across threads.
    """

    kind: str
    param: float | None
    pmf: np.ndarray
    mean: float = field(default=0.0)

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "mean", float(np.arange(pmf.size) @ pmf))

    @property
    def dmax(self) -> int:
        return self.pmf.size - 1

    def moment(self, order: int) -> float:
        d = np.arange(self.pmf.size, dtype=float)
        return float((d**order) @ self.pmf)

    def same_law(self, other: "DegreeDistribution", tol: float = 0.0) -> bool:
        if self.pmf.size != other.pmf.size:
            return False
        return bool(np.all(np.abs(self.pmf - other.pmf) <= tol))

    @classmethod
    def poisson(cls, lam: float, tail_tol: float = DEFAULT_TAIL_TOL) -> "DegreeDistribution":
        if not lam > 0:
            raise ValueError(f"Poisson rate must be positive, got {lam}")
        terms = [math.exp(-lam)]
        cum = terms[0]
        k = 0
        while 1.0 - cum >= tail_tol:
            k += 1
            terms.append(terms[-1] * lam / k)
            cum += terms[-1]
            if k > lam + 10_000:
                raise RuntimeError("Poisson truncation did not converge")
        pmf = np.array(terms)
        pmf /= pmf.sum()
        return cls(kind="poisson", param=float(lam), pmf=pmf)

    @classmethod
    def regular(cls, d: int) -> "DegreeDistribution":
        if d < 0 or d != int(d):
            raise ValueError(f"regular degree must be a nonnegative integer, got {d}")
        pmf = np.zeros(int(d) + 1)
        pmf[int(d)] = 1.0
        return cls(kind="regular", param=float(d), pmf=pmf)

    @classmethod
    def from_table(cls, table) -> "DegreeDistribution":
        if not table:
            raise ValueError("empty degree table")
        items = {int(d): float(p) for d, p in dict(table).items()}
        if any(d < 0 for d in items):
            raise ValueError("negative degree in table")
        if any(p < 0 for p in items.values()):
            raise ValueError("negative probability in table")
        total = sum(items.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"table probabilities sum to {total}, expected 1 within 1e-9")
        dmax = max((d for d, p in items.items() if p > 0), default=0)
        pmf = np.zeros(dmax + 1)
        for d, p in items.items():
            if d <= dmax:
                pmf[d] = p
        pmf /= pmf.sum()
        return cls(kind="table", param=None, pmf=pmf)


def build_distribution(spec, tail_tol: float = DEFAULT_TAIL_TOL) -> DegreeDistribution:
    """Build a distribution from a declaration.

    Accepts a DegreeDistribution (returned as-is) or a one-key mapping
    {"poisson": lam} | {"regular": d} | {"table": {degree: prob}}.
    """
    if isinstance(spec, DegreeDistribution):
        return spec
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError(f"bad distribution declaration: {spec!r}")
    (key, value), = spec.items()
    if key == "poisson":
        return DegreeDistribution.poisson(float(value), tail_tol=tail_tol)
    if key == "regular":
        return DegreeDistribution.regular(int(value))
    if key == "table":
        return DegreeDistribution.from_table(value)
    raise ValueError(f"unknown distribution kind {key!r}")


def size_biased(dist: DegreeDistribution) -> DegreeDistribution:
    """Edge-following degree law: q(d) = d p(d) / mean, supported on d >= 1."""
    if dist.mean <= 0:
        raise ValueError("size bias undefined for a zero-mean distribution")
    d = np.arange(dist.pmf.size, dtype=float)
    q = d * dist.pmf / dist.mean
    q /= q.sum()
    return DegreeDistribution(kind="table", param=None, pmf=q)


@dataclass(frozen=True)
class RegularityReport:
    m1: float
    m2: float
    m3: float
    ok: bool
    failures: tuple[str, ...]


def regularity_report(dist: DegreeDistribution) -> RegularityReport:
    """First three moments plus the checks solvers rely on.

    A finite mean in (0, inf) and finite second and third moments are
    required for the mean-field and ODE guarantees; distributions failing
    the report can still be simulated but carry no guarantees.
    """
    m1, m2, m3 = dist.moment(1), dist.moment(2), dist.moment(3)
    failures = []
    if not (0.0 < m1 < math.inf):
        failures.append("mean not in (0, inf)")
    if not math.isfinite(m2):
        failures.append("second moment not finite")
    if not math.isfinite(m3):
        failures.append("third moment not finite")
    return RegularityReport(m1, m2, m3, ok=not failures, failures=tuple(failures))


@dataclass
class DegreeSequences:
    """Realized per-node degrees: two internal lists plus both cross lists.

    Invariants after repair: each internal sum is even and the two cross
    sums are equal.
    """

    internal1: np.ndarray
    internal2: np.ndarray
    cross1: np.ndarray
    cross2: np.ndarray
    parity_repairs: int = 0
    balance_repairs: int = 0

    def check(self) -> None:
        if int(self.internal1.sum()) % 2 != 0:
            raise ValueError("internal1 stub sum is odd")
        if int(self.internal2.sum()) % 2 != 0:
            raise ValueError("internal2 stub sum is odd")
        if int(self.cross1.sum()) != int(self.cross2.sum()):
            raise ValueError("cross stub sums differ")

    @property
    def m1(self) -> int:
        return int(self.internal1.sum()) // 2

    @property
    def m2(self) -> int:
        return int(self.internal2.sum()) // 2

    @property
    def mm(self) -> int:
        return int(self.cross1.sum())


def _draw(dist: DegreeDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(dist.pmf.size, size=n, p=dist.pmf).astype(np.int64)


def sample_degree_sequences(model, rng: np.random.Generator) -> DegreeSequences:
    """Draw i.i.d. degrees for a model and repair parity and cross balance.

    Parity repair adds one stub to a uniformly chosen node of the odd
    community; balance repair adds stubs one at a time to uniformly chosen
    nodes on the deficient side. The perturbation is O(sqrt(n)) stubs.
    """
    internal1 = _draw(model.p1, model.n1, rng)
    internal2 = _draw(model.p2, model.n2, rng)
    cross1 = _draw(model.pm, model.n1, rng)
    cross2 = _draw(model.pm, model.n2, rng)

    parity = 0
    if int(internal1.sum()) % 2 != 0:
        internal1[rng.integers(model.n1)] += 1
        parity += 1
    if int(internal2.sum()) % 2 != 0:
        internal2[rng.integers(model.n2)] += 1
        parity += 1

    balance = 0
    deficit = int(cross1.sum()) - int(cross2.sum())
    while deficit != 0:
        if deficit < 0:
            cross1[rng.integers(model.n1)] += 1
            deficit += 1
        else:
            cross2[rng.integers(model.n2)] += 1
            deficit -= 1
        balance += 1

    seqs = DegreeSequences(internal1, internal2, cross1, cross2,
                           parity_repairs=parity, balance_repairs=balance)
    seqs.check()
    return seqs
