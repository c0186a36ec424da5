"""Mean-field cascade recursion on the two-community limit tree.

State is a length-4 vector mu of child inactivity probabilities, ordered by
(parent side, child side): mu[0]=(1,1), mu[1]=(1,2), mu[2]=(2,1),
mu[3]=(2,2). One update propagates inactivity through one tree level; the
fixed point reached from all-ones gives the terminal state, and the census
map turns any mu into per-community inactive fractions.

All sums run over the truncated degree supports. Binomial pmfs are built in
log space from cumulative log-factorials, with exact branches at the
endpoint probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .genmodel import ModelSpec, SeedingRule, alpha_grid

MU_LABELS = ("mu11", "mu12", "mu21", "mu22")

# component index -> (mu column of the parent-edge leg, mu column of the other leg)
_COMP_COLS = ((0, 1), (2, 3), (1, 0), (3, 2))
_ROOT_COLS = ((0, 1), (3, 2))


def _log_binom_coeffs(nmax: int) -> np.ndarray:
    """LC[n, u] = log C(n, u), -inf above the diagonal."""
    lgf = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, nmax + 1)))]) if nmax > 0 else np.zeros(1)
    rows = np.arange(nmax + 1)[:, None]
    cols = np.arange(nmax + 1)[None, :]
    diff = rows - cols
    lc = lgf[:, None] - lgf[None, :] - np.where(diff >= 0, lgf[np.maximum(diff, 0)], 0.0)
    lc[diff < 0] = -np.inf
    return lc


class _BinomTables:
    """Bi(u; n, 1-mu) for all n, u <= nmax, plus row cumulatives.

    pmf[n, u]; cdf[n, c] = sum_{u<=c} pmf; ucdf[n, c] = sum_{u<=c} u*pmf.
    """

    __slots__ = ("pmf", "cdf", "ucdf")

    def __init__(self, lc: np.ndarray, mu: float):
        nmax = lc.shape[0] - 1
        if mu >= 1.0:
            pmf = np.zeros_like(lc)
            pmf[:, 0] = 1.0
        elif mu <= 0.0:
            pmf = np.zeros_like(lc)
            pmf[np.arange(nmax + 1), np.arange(nmax + 1)] = 1.0
        else:
            u = np.arange(nmax + 1, dtype=float)[None, :]
            n = np.arange(nmax + 1, dtype=float)[:, None]
            with np.errstate(invalid="ignore"):
                logp = lc + u * np.log1p(-mu) + (n - u) * np.log(mu)
            pmf = np.exp(np.where(np.isnan(logp), -np.inf, logp))
        self.pmf = pmf
        self.cdf = np.cumsum(pmf, axis=1)
        self.ucdf = np.cumsum(pmf * np.arange(nmax + 1)[None, :], axis=1)


class _Staircase:
    """One truncated expectation of the form

        sum_cells w * sum_{uA+uB < K} Bi(uA; mA, 1-muA) Bi(uB; mB, 1-muB)

    with per-cell trial counts mA, mB, weight w and real threshold K.
    Index arrays are laid out once; evaluation is pure gathers. Provides
    the stub-weighted variants and the analytic derivatives in muA / muB
    (inner sums telescoped to the boundary layer uA + uB = ceil(K) - 1).
    """

    def __init__(self, cells_w, cells_mA, cells_mB, cells_K):
        w = np.asarray(cells_w, dtype=float)
        mA = np.asarray(cells_mA, dtype=np.int64)
        mB = np.asarray(cells_mB, dtype=np.int64)
        K = np.asarray(cells_K, dtype=float)
        kc = np.where(K > 0, np.ceil(K).astype(np.int64), 0)

        keep = (w != 0) & (kc > 0)
        w, mA, mB, kc = w[keep], mA[keep], mB[keep], kc[keep]
        self.cells = (w, mA, mB, kc)

        b_rows = []   # (w, mA, mB, uB, cA) with uB outer
        a_rows = []   # (w, mA, mB, uA, cB) with uA outer
        da_rows = []  # (w*mA, mA-1, bA, mB, uB) boundary layer for d/dmuA
        db_rows = []  # (w*mB, mB-1, bB, mA, uA) boundary layer for d/dmuB
        for i in range(len(w)):
            wi, ai, bi, ki = w[i], int(mA[i]), int(mB[i]), int(kc[i])
            for uB in range(min(ki - 1, bi) + 1):
                b_rows.append((wi, ai, bi, uB, min(ki - 1 - uB, ai)))
                bA = ki - 1 - uB
                if ai >= 1 and bA <= ai - 1:
                    da_rows.append((wi * ai, ai - 1, bA, bi, uB))
            for uA in range(min(ki - 1, ai) + 1):
                a_rows.append((wi, ai, bi, uA, min(ki - 1 - uA, bi)))
                bB = ki - 1 - uA
                if bi >= 1 and bB <= bi - 1:
                    db_rows.append((wi * bi, bi - 1, bB, ai, uA))

        def cols(rows, n):
            if not rows:
                return tuple(np.empty(0, dtype=(float if j == 0 else np.int64)) for j in range(n))
            arr = list(zip(*rows))
            return (np.asarray(arr[0], dtype=float),
                    *(np.asarray(a, dtype=np.int64) for a in arr[1:]))

        self._bw, self._bmA, self._bmB, self._buB, self._bcA = cols(b_rows, 5)
        self._aw, self._amA, self._amB, self._auA, self._acB = cols(a_rows, 5)
        self._daw, self._damA, self._dabA, self._damB, self._dauB = cols(da_rows, 5)
        self._dbw, self._dbmB, self._dbbB, self._dbmA, self._dbuA = cols(db_rows, 5)

    def value(self, tA: _BinomTables, tB: _BinomTables) -> float:
        if self._bw.size == 0:
            return 0.0
        return float(np.sum(self._bw * tB.pmf[self._bmB, self._buB]
                            * tA.cdf[self._bmA, self._bcA]))

    def weighted_a(self, tA: _BinomTables, tB: _BinomTables) -> float:
        """sum_cells w * sum_{uA+uB<K} (mA - uA) Bi Bi."""
        if self._bw.size == 0:
            return 0.0
        part = (self._bmA * tA.cdf[self._bmA, self._bcA]
                - tA.ucdf[self._bmA, self._bcA])
        return float(np.sum(self._bw * tB.pmf[self._bmB, self._buB] * part))

    def weighted_b(self, tA: _BinomTables, tB: _BinomTables) -> float:
        """sum_cells w * sum_{uA+uB<K} (mB - uB) Bi Bi."""
        if self._aw.size == 0:
            return 0.0
        part = (self._amB * tB.cdf[self._amB, self._acB]
                - tB.ucdf[self._amB, self._acB])
        return float(np.sum(self._aw * tA.pmf[self._amA, self._auA] * part))

    def deriv_a(self, tA: _BinomTables, tB: _BinomTables) -> float:
        if self._daw.size == 0:
            return 0.0
        return float(np.sum(self._daw * tB.pmf[self._damB, self._dauB]
                            * tA.pmf[self._damA, self._dabA]))

    def deriv_b(self, tA: _BinomTables, tB: _BinomTables) -> float:
        if self._dbw.size == 0:
            return 0.0
        return float(np.sum(self._dbw * tA.pmf[self._dbmA, self._dbuA]
                            * tB.pmf[self._dbmB, self._dbbB]))


def _child_cells(parent_leg_dist, other_dist, alpha, rule, child_community, leg_order):
    """Cell arrays for one child component.

    parent_leg_dist is the distribution of the child's degree along the
    edge type it was reached through (size-biased there, so mA = d - 1);
    other_dist covers its other edge type in full. leg_order says whether
    the parent leg is the child's internal ("same") or cross degree, which
    fixes the argument order of alpha and the threshold rule.
    """
    w, mas, mbs, ks = [], [], [], []
    mean = parent_leg_dist.mean
    if mean <= 0:
        return [], [], [], []
    pA = parent_leg_dist.pmf
    pB = other_dist.pmf
    for dA in range(1, len(pA)):
        wa = pA[dA] * dA / mean
        if wa == 0.0:
            continue
        for dB in range(len(pB)):
            if pB[dB] == 0.0:
                continue
            if leg_order == "same":
                d_same, d_cross = dA, dB
            else:
                d_same, d_cross = dB, dA
            w.append(wa * pB[dB] * (1.0 - alpha[d_same, d_cross]))
            mas.append(dA - 1)
            mbs.append(dB)
            ks.append(rule.value(child_community, d_same, d_cross))
    return w, mas, mbs, ks


def _root_cells(internal_dist, cross_dist, alpha, rule, community, full_internal=True):
    w, mas, mbs, ks = [], [], [], []
    pI = internal_dist.pmf
    pC = cross_dist.pmf
    for dI in range(len(pI)):
        if pI[dI] == 0.0:
            continue
        mA = dI if full_internal else max(dI - 1, 0)
        for dC in range(len(pC)):
            if pC[dC] == 0.0:
                continue
            w.append(pI[dI] * pC[dC] * (1.0 - alpha[dI, dC]))
            mas.append(mA)
            mbs.append(dC)
            ks.append(rule.value(community, dI, dC))
    return w, mas, mbs, ks


class CascadeRecursion:
    """Precomputed evaluator for the recursion map, census and Jacobian.

    Building the plan is model-dependent but mu-independent; reuse one
    instance across many evaluations. All methods are pure; instances are
    safe for concurrent use.
    """

    def __init__(self, model: ModelSpec, seeding: SeedingRule | None = None,
                 root_full_degree: bool = True):
        self.model = model
        self.seeding = model.seeding if seeding is None else seeding
        self.lam1 = model.p1.mean
        self.lam2 = model.p2.mean
        self.lamm = model.pm.mean
        nmax = max(model.p1.dmax, model.p2.dmax, model.pm.dmax)
        self._lc = _log_binom_coeffs(nmax)

        rule = model.threshold
        a1 = alpha_grid(self.seeding, model, 1, model.p1.dmax, model.pm.dmax)
        a2 = alpha_grid(self.seeding, model, 2, model.p2.dmax, model.pm.dmax)
        self._alpha = (a1, a2)

        self.components = (
            _Staircase(*_child_cells(model.p1, model.pm, a1, rule, 1, "same")),
            _Staircase(*_child_cells(model.pm, model.p2, a2, rule, 2, "cross")),
            _Staircase(*_child_cells(model.pm, model.p1, a1, rule, 1, "cross")),
            _Staircase(*_child_cells(model.p2, model.pm, a2, rule, 2, "same")),
        )
        self.roots = (
            _Staircase(*_root_cells(model.p1, model.pm, a1, rule, 1, root_full_degree)),
            _Staircase(*_root_cells(model.p2, model.pm, a2, rule, 2, root_full_degree)),
        )
        self._table_cache: dict[bytes, list[_BinomTables]] = {}

    # -- seeding mass diagnostics -------------------------------------
    def root_seed_mass(self, community: int) -> float:
        pI = self.model.internal_dist(community).pmf
        pC = self.model.pm.pmf
        return float(pI @ self._alpha[community - 1][: len(pI), : len(pC)] @ pC)

    def child_seed_mass(self, component: int) -> float:
        """Expected seeding probability of the child type feeding one component."""
        m = self.model
        if component in (0, 3):
            j = 1 if component == 0 else 2
            leg, other, order = m.internal_dist(j), m.pm, "same"
        else:
            j = 2 if component == 1 else 1
            leg, other, order = m.pm, m.internal_dist(j), "cross"
        if leg.mean <= 0:
            return 0.0
        alpha = self._alpha[j - 1]
        d = np.arange(leg.pmf.size)
        wa = d * leg.pmf / leg.mean
        grid = alpha if order == "same" else alpha.T
        return float(wa @ grid[: leg.pmf.size, : other.pmf.size] @ other.pmf)

    # -- evaluation ----------------------------------------------------
    def _tables(self, mu: np.ndarray) -> list[_BinomTables]:
        # tiny FIFO memo: RK stages and sample reconstruction revisit states
        key = mu.tobytes()
        cached = self._table_cache.get(key)
        if cached is not None:
            return cached
        tables = [_BinomTables(self._lc, float(m)) for m in mu]
        if len(self._table_cache) >= 16:
            self._table_cache.pop(next(iter(self._table_cache)))
        self._table_cache[key] = tables
        return tables

    def update(self, mu) -> np.ndarray:
        mu = _check_mu(mu)
        t = self._tables(mu)
        out = np.empty(4)
        for c, (xa, xb) in enumerate(_COMP_COLS):
            out[c] = self.components[c].value(t[xa], t[xb])
        return out

    def inactive_fractions(self, mu) -> np.ndarray:
        mu = _check_mu(mu)
        t = self._tables(mu)
        return np.array([self.roots[j].value(t[xa], t[xb])
                         for j, (xa, xb) in enumerate(_ROOT_COLS)])

    def jacobian(self, mu) -> np.ndarray:
        mu = _check_mu(mu)
        t = self._tables(mu)
        jac = np.zeros((4, 4))
        for c, (xa, xb) in enumerate(_COMP_COLS):
            jac[c, xa] = self.components[c].deriv_a(t[xa], t[xb])
            jac[c, xb] = self.components[c].deriv_b(t[xa], t[xb])
        return jac

    def inactive_stub_mass(self, mu) -> tuple[np.ndarray, np.ndarray]:
        """Per community: expected internal and cross stubs still held by
        inactive nodes, per node of that community."""
        mu = _check_mu(mu)
        t = self._tables(mu)
        internal = np.empty(2)
        cross = np.empty(2)
        for j, (xa, xb) in enumerate(_ROOT_COLS):
            internal[j] = self.roots[j].weighted_a(t[xa], t[xb])
            cross[j] = self.roots[j].weighted_b(t[xa], t[xb])
        return internal, cross

    def census(self, mu) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(inactive fractions, internal stub mass, cross stub mass), one pass."""
        mu = _check_mu(mu)
        t = self._tables(mu)
        phi = np.empty(2)
        internal = np.empty(2)
        cross = np.empty(2)
        for j, (xa, xb) in enumerate(_ROOT_COLS):
            phi[j] = self.roots[j].value(t[xa], t[xb])
            internal[j] = self.roots[j].weighted_a(t[xa], t[xb])
            cross[j] = self.roots[j].weighted_b(t[xa], t[xb])
        return phi, internal, cross


def _check_mu(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (4,):
        raise ValueError(f"mu must have shape (4,), got {mu.shape}")
    if mu.min() < -1e-12 or mu.max() > 1.0 + 1e-12:
        raise ValueError(f"mu outside [0,1]^4: {mu}")
    return np.clip(mu, 0.0, 1.0)


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def recursion_update(model: ModelSpec, mu, seeding: SeedingRule | None = None) -> np.ndarray:
    return CascadeRecursion(model, seeding).update(mu)


def inactive_fractions(model: ModelSpec, mu, seeding: SeedingRule | None = None,
                       root_full_degree: bool = True) -> np.ndarray:
    """Census map: per-community probability of remaining inactive.

    The root's internal leg uses its full degree; root_full_degree=False
    reproduces the off-by-one variant with d-1 internal children for
    comparison purposes.
    """
    return CascadeRecursion(model, seeding, root_full_degree=root_full_degree).inactive_fractions(mu)


def recursion_jacobian(model: ModelSpec, mu, seeding: SeedingRule | None = None) -> np.ndarray:
    """Analytic 4x4 Jacobian of the recursion map at mu.

    Row c holds the partials of component c; entries outside the two
    argument columns of each component are exactly zero.
    """
    return CascadeRecursion(model, seeding).jacobian(mu)


@dataclass(frozen=True)
class FixedPointResult:
    mu: np.ndarray
    phi: np.ndarray
    iterations: int
    converged: bool

    def adoption(self) -> np.ndarray:
        return 1.0 - self.phi

    def to_dict(self) -> dict:
        return {
            "mu": [float(x) for x in self.mu],
            "phi": [float(x) for x in self.phi],
            "iterations": self.iterations,
            "converged": self.converged,
        }


def solve_fixed_point(model: ModelSpec, tol: float = 1e-12, max_iter: int = 10**6,
                      seeding: SeedingRule | None = None,
                      op: CascadeRecursion | None = None) -> FixedPointResult:
    """Iterate the recursion from all-ones down to its nearest fixed point.

    Iterates are componentwise non-increasing; a violation beyond floating
    noise is an implementation bug and raises. Non-convergence within
    max_iter returns the last iterate flagged converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if op is None:
        op = CascadeRecursion(model, seeding)
    mu = np.ones(4)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = op.update(mu)
        if np.any(nxt > mu + 1e-9):
            raise InvariantViolation(f"non-monotone fixed-point step at iteration {iterations}")
        nxt = np.minimum(nxt, mu)
        step = float(np.max(np.abs(nxt - mu)))
        mu = nxt
        if step < tol:
            converged = True
            break
    phi = op.inactive_fractions(mu)
    return FixedPointResult(mu=mu, phi=phi, iterations=iterations, converged=converged)


def termination_check(model: ModelSpec, mu_star, seeding: SeedingRule | None = None,
                      fp_tol: float = 1e-10) -> bool | None:
    """Whether the stochastic process stops at the computed fixed point.

    True when the Perron root of the Jacobian at mu_star is below 1 by more
    than 1e-9, False when above by more than 1e-9, None (indeterminate)
    inside that margin. mu_star must be a fixed point within fp_tol.
    """
    from .contagion import perron_root

    op = CascadeRecursion(model, seeding)
    mu_star = _check_mu(mu_star)
    resid = float(np.max(np.abs(op.update(mu_star) - mu_star)))
    if resid > fp_tol:
        raise ValueError(f"mu_star is not a fixed point (residual {resid:.3e} > {fp_tol:.1e})")
    rho = perron_root(op.jacobian(mu_star))
    if rho < 1.0 - 1e-9:
        return True
    if rho > 1.0 + 1e-9:
        return False
    return None
