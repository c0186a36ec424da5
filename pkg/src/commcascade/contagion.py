"""Contagion-threshold analysis.

A finite seed set grows to a positive fraction of the population exactly
when the Perron root of the recursion's Jacobian at the unseeded all-ones
state exceeds 1. Only pivotal node types (threshold in (0, 1], so a single
active neighbor flips them) contribute to that Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .genmodel import GlobalSeeding, ModelSpec
from .meanfield import CascadeRecursion, FixedPointResult, solve_fixed_point

INDETERMINATE_MARGIN = 1e-9


def _pivotal_sum(leg_dist, other_dist, rule, community, leg_order) -> tuple[float, float]:
    """Closed-form Jacobian entries at the unseeded all-ones state.

    Returns (parent-leg entry, other-leg entry): expectations of the
    child-count weights over pivotal node types.
    """
    if leg_dist.mean <= 0:
        return 0.0, 0.0
    pA, pB = leg_dist.pmf, other_dist.pmf
    ent_a = 0.0
    ent_b = 0.0
    for dA in range(1, len(pA)):
        wa = pA[dA] * dA / leg_dist.mean
        if wa == 0.0:
            continue
        for dB in range(len(pB)):
            if pB[dB] == 0.0:
                continue
            d_same, d_cross = (dA, dB) if leg_order == "same" else (dB, dA)
            k = rule.value(community, d_same, d_cross)
            if 0.0 < k <= 1.0:
                ent_a += wa * pB[dB] * (dA - 1)
                ent_b += wa * pB[dB] * dB
    return ent_a, ent_b


def unseeded_jacobian(model: ModelSpec) -> np.ndarray:
    """Jacobian of the recursion at mu = 1 with seeding forced to zero.

    Computed from the closed-form pivotal sums; independent of the general
    Jacobian code path.
    """
    jac = np.zeros((4, 4))
    a, b = _pivotal_sum(model.p1, model.pm, model.threshold, 1, "same")
    jac[0, 0], jac[0, 1] = a, b
    a, b = _pivotal_sum(model.pm, model.p2, model.threshold, 2, "cross")
    jac[1, 2], jac[1, 3] = a, b
    a, b = _pivotal_sum(model.pm, model.p1, model.threshold, 1, "cross")
    jac[2, 1], jac[2, 0] = a, b
    a, b = _pivotal_sum(model.p2, model.pm, model.threshold, 2, "same")
    jac[3, 3], jac[3, 2] = a, b
    return jac


def _scc_components(mask: np.ndarray) -> list[list[int]]:
    """Strongly connected components of a small adjacency mask."""
    n = mask.shape[0]
    reach = mask | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
    mutual = reach & reach.T
    seen = set()
    comps = []
    for i in range(n):
        if i in seen:
            continue
        comp = [j for j in range(n) if mutual[i, j]]
        seen.update(comp)
        comps.append(comp)
    return comps


def perron_root(matrix: np.ndarray, tol: float = 1e-13, max_iter: int = 10**5) -> float:
    """Largest eigenvalue of a nonnegative matrix.

    Power iteration with Rayleigh-quotient estimates, started from the
    all-ones vector. The matrix is shifted by the identity first (which
    moves the root up by exactly 1 and makes irreducible blocks primitive,
    so periodic patterns still converge), and reducible matrices are
    handled by taking the maximum over their strongly connected blocks.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if m.min() < 0:
        raise ValueError("matrix has a negative entry")

    best = 0.0
    for comp in _scc_components(m > 0):
        block = m[np.ix_(comp, comp)]
        if len(comp) == 1:
            best = max(best, float(block[0, 0]))
            continue
        shifted = block + np.eye(len(comp))
        x = np.ones(len(comp))
        x /= np.linalg.norm(x)
        est = 0.0
        for _ in range(max_iter):
            y = shifted @ x
            norm = np.linalg.norm(y)
            if norm == 0.0:
                est = 0.0
                break
            new_est = float(x @ y)
            x = y / norm
            if abs(new_est - est) < tol:
                est = new_est
                break
            est = new_est
        best = max(best, est - 1.0)
    return best


@dataclass(frozen=True)
class ContagionReport:
    jacobian_at_one: np.ndarray
    rho: float
    contagious: bool
    margin: float
    indeterminate: bool
    pivotal_masses: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "contagious": self.contagious,
            "margin": self.margin,
            "indeterminate": self.indeterminate,
            "jacobian": [[float(x) for x in row] for row in self.jacobian_at_one],
            "pivotal_masses": dict(self.pivotal_masses),
        }


_ENTRY_NAMES = (
    ("dF11_dmu11", 0, 0), ("dF11_dmu12", 0, 1),
    ("dF12_dmu21", 1, 2), ("dF12_dmu22", 1, 3),
    ("dF21_dmu12", 2, 1), ("dF21_dmu11", 2, 0),
    ("dF22_dmu22", 3, 3), ("dF22_dmu21", 3, 2),
)


def is_contagious(model: ModelSpec, cross_check_tol: float = 1e-12) -> ContagionReport:
    """Decide whether a vanishing seed fraction can still take over.

    The closed-form unseeded Jacobian is cross-checked against the general
    analytic Jacobian evaluated at all-ones with zero seeding; disagreement
    beyond cross_check_tol aborts. Within 1e-9 of the critical root the
    verdict is flagged indeterminate.
    """
    jac = unseeded_jacobian(model)
    general = CascadeRecursion(model, seeding=GlobalSeeding(0.0)).jacobian(np.ones(4))
    err = float(np.max(np.abs(jac - general)))
    if err > cross_check_tol:
        raise InvariantViolation(
            f"closed-form and general Jacobians disagree at the unseeded state ({err:.3e})")
    rho = perron_root(jac)
    margin = abs(rho - 1.0)
    return ContagionReport(
        jacobian_at_one=jac,
        rho=rho,
        contagious=bool(rho > 1.0),
        margin=margin,
        indeterminate=bool(margin <= INDETERMINATE_MARGIN),
        pivotal_masses={name: float(jac[r, c]) for name, r, c in _ENTRY_NAMES},
    )


def spontaneous_adopter_mass(model: ModelSpec) -> np.ndarray:
    """Per-community probability mass of node types with threshold <= 0.

    Such nodes adopt with no active neighbors (for a linear rule these are
    the isolated nodes), so they inflate every adoption count by a
    seed-independent baseline.
    """
    out = np.zeros(2)
    for j in (1, 2):
        pI = model.internal_dist(j).pmf
        pC = model.pm.pmf
        total = 0.0
        for ds in range(len(pI)):
            if pI[ds] == 0.0:
                continue
            for dc in range(len(pC)):
                if pC[dc] > 0.0 and model.threshold.value(j, ds, dc) <= 0.0:
                    total += pI[ds] * pC[dc]
        out[j - 1] = total
    return out


@dataclass(frozen=True)
class SmallSeedRow:
    alpha: float
    result: FixedPointResult
    spontaneous: float

    @property
    def deficit(self) -> float:
        """Mean adopted fraction beyond the seeds and spontaneous adopters."""
        return float(np.mean(1.0 - self.result.phi)) - self.alpha - self.spontaneous


@dataclass(frozen=True)
class SmallSeedTable:
    rows: tuple[SmallSeedRow, ...]
    verdict: str | None  # "contagion" | "no_contagion" | None

    def to_dict(self) -> dict:
        return {
            "rows": [{"alpha": r.alpha, **r.result.to_dict(), "deficit": r.deficit}
                     for r in self.rows],
            "verdict": self.verdict,
        }


def small_seed_limit(model: ModelSpec, alphas, deficit_floor: float = 0.01) -> SmallSeedTable:
    """Fixed points along a shrinking uniform seeding sequence.

    With no contagion the adopted fraction collapses onto the seeds plus
    the spontaneous (threshold <= 0) baseline; with contagion it stays
    bounded away from them. The verdict compares the final deficit against
    deficit_floor and is omitted for a single-element sequence.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")
    baseline = float(np.mean(spontaneous_adopter_mass(model)))
    rows = tuple(SmallSeedRow(alpha=a, spontaneous=baseline,
                              result=solve_fixed_point(model, seeding=GlobalSeeding(a)))
                 for a in alphas)
    verdict = None
    if len(rows) > 1:
        verdict = "contagion" if rows[-1].deficit > deficit_floor else "no_contagion"
    return SmallSeedTable(rows=rows, verdict=verdict)
