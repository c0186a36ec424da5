"""Four-dimensional cascade flow, observable reconstruction, reductions.

Two integrations of the same curve in mu-space:

* trajectory mode follows d(mu)/dt = update(mu) - mu from all-ones and
  stops at stationarity; its time variable is not the process clock.
* physical mode follows the process-time equations, whose right side
  divides by the total active-stub density S; it stops when S drops below
  the configured epsilon, which is where the finite-n chain stops tracking
  the fluid limit.

Observables (active stub densities, pairing clocks, inactive fractions)
are reconstructed in closed form from mu at every Runge-Kutta stage, so
the accounting identities hold by construction instead of drifting.

Units are per community-member: stub densities divide by the community
size, which matches the recursion's degree means when n1 == n2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .dist import DegreeDistribution
from .errors import InvariantViolation
from .genmodel import (CustomSeeding, DegreeTargetedSeeding, GlobalSeeding,
                       ModelSpec, PerCommunitySeeding, SeedingRule, alpha_of)
from .meanfield import CascadeRecursion

_MONOTONE_SLACK = 1e-9


class StopReason(Enum):
    DENOMINATOR_BELOW_EPS = "denominator_below_eps"
    STATIONARY_WITHIN_TOL = "stationary_within_tol"
    T_MAX_REACHED = "t_max_reached"


@dataclass(frozen=True)
class OdeConfig:
    step: float = 1e-3
    epsilon: float = 1e-6
    t_max: float | None = None
    mode: str = "trajectory"
    sample_stride: int = 1

    def __post_init__(self):
        if not (0.0 < self.step < 0.1):
            raise ValueError(f"step must lie in (0, 0.1), got {self.step}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.mode not in ("trajectory", "physical"):
            raise ValueError(f"mode must be 'trajectory' or 'physical', got {self.mode!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


class Observables(NamedTuple):
    a1: float
    a2: float
    am1: float
    am2: float
    tau1: float
    tau2: float
    phi1: float
    phi2: float

    @property
    def denom(self) -> float:
        return self.a1 + self.a2 + self.am1 + self.am2


CSV_COLUMNS = ("t", "mu11", "mu12", "mu21", "mu22", "a1", "a2", "am1", "am2",
               "tau1", "tau2", "phi1", "phi2", "denom")


@dataclass
class OdeTrajectory:
    mode: str
    t: np.ndarray
    mu: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    denom: np.ndarray
    terminal_mu: np.ndarray
    stop_reason: StopReason
    flags: list[str] = field(default_factory=list)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.mu, self.a, self.tau, self.phi, self.denom])


def reconstruct_observables(model: ModelSpec, mu, t: float | None = None,
                            seeding: SeedingRule | None = None,
                            op: CascadeRecursion | None = None) -> Observables:
    """Closed-form observables at a given mu.

    With physical time t the remaining cross budget is lam_m - (t - tau1 -
    tau2); without it the equivalent product form lam_m * mu21 * mu12 is
    used, which agrees along physical trajectories.
    """
    if op is None:
        op = CascadeRecursion(model, seeding)
    mu = np.asarray(mu, dtype=float)
    phi, int_mass, cross_mass = op.census(mu)
    tau1 = 0.5 * op.lam1 * (1.0 - mu[0] ** 2)
    tau2 = 0.5 * op.lam2 * (1.0 - mu[3] ** 2)
    a1 = op.lam1 - 2.0 * tau1 - int_mass[0]
    a2 = op.lam2 - 2.0 * tau2 - int_mass[1]
    if t is None:
        budget = op.lamm * mu[2] * mu[1]
    else:
        budget = op.lamm - (t - tau1 - tau2)
    am1 = budget - cross_mass[0]
    am2 = budget - cross_mass[1]
    return Observables(a1, a2, am1, am2, tau1, tau2, float(phi[0]), float(phi[1]))


def _clip_state(mu: np.ndarray, flags: list[str]) -> np.ndarray:
    if mu.min() < -_MONOTONE_SLACK or mu.max() > 1.0 + _MONOTONE_SLACK:
        if "clamped_out_of_bounds" not in flags:
            flags.append("clamped_out_of_bounds")
    return np.clip(mu, 0.0, 1.0)


def _enforce_monotone(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    if np.any(new > old + _MONOTONE_SLACK):
        raise InvariantViolation("mu increased along the flow")
    return np.minimum(new, old)


def integrate_trajectory(model: ModelSpec, cfg: OdeConfig | None = None,
                         seeding: SeedingRule | None = None,
                         op: CascadeRecursion | None = None,
                         stationary_tol: float = 1e-10) -> OdeTrajectory:
    """Fixed-step RK4 on d(mu)/dt = update(mu) - mu from mu = 1."""
    cfg = cfg or OdeConfig()
    if cfg.mode != "trajectory":
        raise ValueError("config mode must be 'trajectory'")
    if op is None:
        op = CascadeRecursion(model, seeding)
    t_max = 200.0 if cfg.t_max is None else cfg.t_max
    h = cfg.step

    flags: list[str] = []
    rhs = lambda m: op.update(_clip_state(m, flags)) - _clip_state(m, flags)

    mu = np.ones(4)
    t = 0.0
    samples = []
    steps = 0
    stop = StopReason.T_MAX_REACHED

    def record():
        obs = reconstruct_observables(model, mu, t=None, op=op)
        samples.append((t, mu.copy(), obs))

    while True:
        k1 = rhs(mu)
        if steps % cfg.sample_stride == 0:
            record()
        if float(np.max(np.abs(k1))) < stationary_tol:
            stop = StopReason.STATIONARY_WITHIN_TOL
            break
        if t >= t_max:
            stop = StopReason.T_MAX_REACHED
            break
        k2 = rhs(mu + 0.5 * h * k1)
        k3 = rhs(mu + 0.5 * h * k2)
        k4 = rhs(mu + h * k3)
        new = mu + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new = _clip_state(new, flags)
        mu = _enforce_monotone(new, mu)
        t += h
        steps += 1

    if samples[-1][0] != t:
        record()
    return _pack(samples, mu, stop, flags, "trajectory")


def stub_densities_from_update(op: CascadeRecursion, mu: np.ndarray,
                               f: np.ndarray | None = None) -> np.ndarray:
    """Active stub densities (a1, a2, am1, am2) in product form.

    Algebraically identical to the census reconstruction: the internal
    inactive-stub mass collapses to lam_j mu_jj F_jj and the cross one to
    lam_m mu_(j,-j) F_(-j,j), which leaves a_j = lam_j mu_jj (mu_jj - F_jj)
    and am_j = lam_m mu_(j,-j) (mu_(-j,j) - F_(-j,j)). This form involves
    no division by mu and keeps the conservation identity a structural
    first integral of the flow.
    """
    if f is None:
        f = op.update(mu)
    a1 = op.lam1 * mu[0] * (mu[0] - f[0])
    a2 = op.lam2 * mu[3] * (mu[3] - f[3])
    am1 = op.lamm * mu[1] * (mu[2] - f[2])
    am2 = op.lamm * mu[2] * (mu[1] - f[1])
    return np.array([a1, a2, am1, am2])


def integrate_physical(model: ModelSpec, cfg: OdeConfig | None = None,
                       seeding: SeedingRule | None = None,
                       op: CascadeRecursion | None = None,
                       arc_budget: float = 300.0) -> OdeTrajectory:
    """Process-time flow, integrated in its regular parameterization.

    The process-time equations divide the update direction by the total
    active stub density S, so they trace the same curve as the plain flow
    but at speed 1/S, which turns singular as S approaches zero. We
    therefore integrate the equivalent augmented system

        d(mu)/ds = update(mu) - mu,      dt/ds = S(mu),

    with fixed-step RK4 in s; t is then the physical clock and S is
    rebuilt in closed form at every stage. The conservation identity
    lam_m mu21 mu12 = lam_m - (t - tau1 - tau2) is a first integral of
    this system, so it drifts only by truncation error. The run stops on
    the first sample with S < epsilon (the point past which the chain no
    longer tracks the fluid limit) or when a mu component falls below
    epsilon (division guard, flagged); t_max and arc_budget are safety
    caps.
    """
    cfg = cfg or OdeConfig(mode="physical")
    if cfg.mode != "physical":
        raise ValueError("config mode must be 'physical'")
    if op is None:
        op = CascadeRecursion(model, seeding)
    lam1, lam2, lamm = op.lam1, op.lam2, op.lamm
    t_max = cfg.t_max if cfg.t_max is not None else 0.5 * (lam1 + lam2) + lamm + 1.0
    h = cfg.step
    eps = cfg.epsilon
    flags: list[str] = []

    def field(y: np.ndarray) -> np.ndarray:
        mu = _clip_state(y[:4], flags)
        f = op.update(mu)
        s = float(np.sum(stub_densities_from_update(op, mu, f)))
        out = np.empty(5)
        out[:4] = f - mu
        out[4] = s
        return out

    def total_density(mu: np.ndarray) -> float:
        return float(np.sum(stub_densities_from_update(op, mu)))

    mu = np.ones(4)
    t = 0.0
    if total_density(mu) <= eps:
        raise ValueError("no initial active stub mass; physical mode needs nonzero seeding")

    samples = [(t, mu.copy(), reconstruct_observables(model, mu, t=t, op=op))]
    steps = 0
    stop = StopReason.T_MAX_REACHED
    y = np.concatenate([mu, [t]])
    while True:
        mu, t = y[:4], float(y[4])
        if total_density(mu) < eps:
            stop = StopReason.DENOMINATOR_BELOW_EPS
            break
        if mu.min() < eps:
            stop = StopReason.DENOMINATOR_BELOW_EPS
            flags.append("mu_below_eps")
            break
        if t >= t_max:
            stop = StopReason.T_MAX_REACHED
            break
        if steps * h >= arc_budget:
            stop = StopReason.T_MAX_REACHED
            flags.append("arc_budget_exhausted")
            break
        k1 = field(y)
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new[:4] = _enforce_monotone(_clip_state(new[:4], flags), y[:4])
        y = new
        steps += 1
        if steps % cfg.sample_stride == 0:
            samples.append((float(y[4]), y[:4].copy(),
                            reconstruct_observables(model, y[:4], t=float(y[4]), op=op)))

    mu, t = y[:4].copy(), float(y[4])
    if samples[-1][0] != t:
        samples.append((t, mu, reconstruct_observables(model, mu, t=t, op=op)))
    return _pack(samples, mu, stop, flags, "physical")


def _pack(samples, terminal_mu, stop, flags, mode) -> OdeTrajectory:
    t = np.array([s[0] for s in samples])
    mu = np.vstack([s[1] for s in samples])
    obs = [s[2] for s in samples]
    a = np.array([[o.a1, o.a2, o.am1, o.am2] for o in obs])
    tau = np.array([[o.tau1, o.tau2] for o in obs])
    phi = np.array([[o.phi1, o.phi2] for o in obs])
    denom = np.array([o.denom for o in obs])
    return OdeTrajectory(mode=mode, t=t, mu=mu, a=a, tau=tau, phi=phi,
                         denom=denom, terminal_mu=terminal_mu.copy(),
                         stop_reason=stop, flags=flags)


# --------------------------------------------------------------------------
# dimension reductions
# --------------------------------------------------------------------------

def _alpha_total_degree_only(model: ModelSpec, community: int) -> bool:
    s = model.seeding
    if isinstance(s, (GlobalSeeding, PerCommunitySeeding, DegreeTargetedSeeding)):
        return True
    if isinstance(s, CustomSeeding):
        dmax_i = model.internal_dist(community).dmax
        dmax_c = model.pm.dmax
        seen: dict[int, float] = {}
        for ds in range(dmax_i + 1):
            for dc in range(dmax_c + 1):
                a = alpha_of(s, model, community, ds, dc)
                if seen.setdefault(ds + dc, a) != a:
                    return False
        return True
    return False


def _is_poissonish(dist: DegreeDistribution) -> tuple[bool, float]:
    """Poisson kind, or the degenerate all-mass-at-zero limit (rate 0)."""
    if dist.kind == "poisson":
        return True, float(dist.param)
    if dist.pmf.size == 1 and dist.pmf[0] == 1.0:
        return True, 0.0
    return False, 0.0


@dataclass
class ReducedFlow:
    """Two-variable flow equivalent to the full system under a symmetry.

    names labels the two variables; lift maps them to the 4-vector mu. The
    right side evaluates the two distinct components of the full recursion
    at the lifted state.
    """

    model: ModelSpec
    names: tuple[str, str]
    lift: Callable[[np.ndarray], np.ndarray]
    _rhs_components: tuple[int, int]
    _op: CascadeRecursion

    def update2(self, nu: np.ndarray) -> np.ndarray:
        mu = self.lift(nu)
        full = self._op.update(mu)
        return np.array([full[self._rhs_components[0]], full[self._rhs_components[1]]])

    def integrate(self, cfg: OdeConfig | None = None,
                  stationary_tol: float = 1e-10) -> OdeTrajectory:
        """RK4 on the reduced pair, reported as a lifted full trajectory."""
        cfg = cfg or OdeConfig()
        if cfg.mode != "trajectory":
            raise ValueError("reduced flows integrate in trajectory mode")
        t_max = 200.0 if cfg.t_max is None else cfg.t_max
        h = cfg.step
        flags: list[str] = []
        rhs = lambda v: self.update2(np.clip(v, 0.0, 1.0)) - np.clip(v, 0.0, 1.0)
        nu = np.ones(2)
        t = 0.0
        samples = []
        steps = 0
        stop = StopReason.T_MAX_REACHED
        while True:
            k1 = rhs(nu)
            if steps % cfg.sample_stride == 0:
                mu = self.lift(nu)
                samples.append((t, mu, reconstruct_observables(self.model, mu, t=None, op=self._op)))
            if float(np.max(np.abs(k1))) < stationary_tol:
                stop = StopReason.STATIONARY_WITHIN_TOL
                break
            if t >= t_max:
                break
            k2 = rhs(nu + 0.5 * h * k1)
            k3 = rhs(nu + 0.5 * h * k2)
            k4 = rhs(nu + h * k3)
            new = np.clip(nu + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, 1.0)
            if np.any(new > nu + _MONOTONE_SLACK):
                raise InvariantViolation("reduced state increased along the flow")
            nu = np.minimum(new, nu)
            t += h
            steps += 1
        if samples[-1][0] != t:
            mu = self.lift(nu)
            samples.append((t, mu, reconstruct_observables(self.model, mu, t=None, op=self._op)))
        return _pack(samples, self.lift(nu), stop, flags, "trajectory")


def poisson_reduction(model: ModelSpec) -> ReducedFlow:
    """Reduction valid for Poisson degrees with total-degree rules.

    Under it the child inactivity depends only on the child's side, so
    mu11 == mu21 and mu22 == mu12; the reduced variables are the per-side
    values (nu1, nu2).
    """
    for name, dist in (("p1", model.p1), ("p2", model.p2)):
        ok, _ = _is_poissonish(dist)
        if not ok:
            raise ValueError(f"{name} must be Poisson for this reduction")
    ok, _ = _is_poissonish(model.pm)
    if not ok:
        raise ValueError("pm must be Poisson for this reduction")
    for j in (1, 2):
        if not model.threshold.depends_on_total_only(j):
            raise ValueError("threshold must depend on total degree only")
        if not _alpha_total_degree_only(model, j):
            raise ValueError("seeding must depend on total degree only")
    lift = lambda nu: np.array([nu[0], nu[1], nu[0], nu[1]])
    return ReducedFlow(model=model, names=("nu1", "nu2"), lift=lift,
                       _rhs_components=(0, 3), _op=CascadeRecursion(model))


def _seeding_mirror_symmetric(model: ModelSpec) -> bool:
    s = model.seeding
    if isinstance(s, GlobalSeeding):
        return True
    if isinstance(s, PerCommunitySeeding):
        return s.alpha1 == s.alpha2
    if isinstance(s, DegreeTargetedSeeding):
        return s.budget1 * model.n / model.n1 == s.budget2 * model.n / model.n2
    if isinstance(s, CustomSeeding):
        dmax_i = max(model.p1.dmax, model.p2.dmax)
        for ds in range(dmax_i + 1):
            for dc in range(model.pm.dmax + 1):
                if alpha_of(s, model, 1, ds, dc) != alpha_of(s, model, 2, ds, dc):
                    return False
        return True
    return False


def symmetric_reduction(model: ModelSpec) -> ReducedFlow:
    """Reduction valid under the community-exchange symmetry.

    Requires equal internal degree laws and mirror-symmetric threshold and
    seeding rules; then mu11 == mu22 and mu12 == mu21, reduced to
    (mu_same, mu_cross).
    """
    if not model.p1.same_law(model.p2, tol=0.0):
        raise ValueError("internal degree laws differ between communities")
    if not model.threshold.mirror_symmetric():
        raise ValueError("threshold rule is not symmetric between communities")
    if not _seeding_mirror_symmetric(model):
        raise ValueError("seeding rule is not symmetric between communities")
    lift = lambda nu: np.array([nu[0], nu[1], nu[1], nu[0]])
    return ReducedFlow(model=model, names=("mu_same", "mu_cross"), lift=lift,
                       _rhs_components=(0, 1), _op=CascadeRecursion(model))


# --------------------------------------------------------------------------
# single-community equivalent
# --------------------------------------------------------------------------

class SingleCommunityModel:
    """One-community cascade recursion with its own direct implementation.

    Deliberately independent of the two-community machinery: plain scalar
    fixed-point iteration over the total-degree law, used both as the
    collapsed equivalent model and as a cross-check oracle.
    """

    def __init__(self, dist: DegreeDistribution,
                 threshold_fn: Callable[[int], float],
                 alpha_fn: Callable[[int], float]):
        if dist.mean <= 0:
            raise ValueError("single-community model needs positive mean degree")
        self.dist = dist
        self.threshold_fn = threshold_fn
        self.alpha_fn = alpha_fn
        p = dist.pmf
        self._alpha = np.array([alpha_fn(d) for d in range(p.size)])
        self._K = np.array([threshold_fn(d) for d in range(p.size)])

    def _binom_row(self, n: int, mu: float) -> np.ndarray:
        # pmf of Binomial(n, 1-mu), length n+1
        if mu >= 1.0:
            row = np.zeros(n + 1)
            row[0] = 1.0
            return row
        if mu <= 0.0:
            row = np.zeros(n + 1)
            row[n] = 1.0
            return row
        u = np.arange(n + 1)
        lc = np.array([math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                       for k in u])
        return np.exp(lc + u * np.log1p(-mu) + (n - u) * np.log(mu))

    def update(self, mu: float) -> float:
        p = self.dist.pmf
        total = 0.0
        for d in range(1, p.size):
            if p[d] == 0.0:
                continue
            K = self._K[d]
            if K <= 0:
                continue
            kc = int(np.ceil(K))
            row = self._binom_row(d - 1, mu)
            total += p[d] * d / self.dist.mean * (1.0 - self._alpha[d]) * row[:min(kc, d)].sum()
        return total

    def inactive_fraction(self, mu: float) -> float:
        p = self.dist.pmf
        total = 0.0
        for d in range(p.size):
            if p[d] == 0.0:
                continue
            K = self._K[d]
            if K <= 0:
                continue
            kc = int(np.ceil(K))
            row = self._binom_row(d, mu)
            total += p[d] * (1.0 - self._alpha[d]) * row[:min(kc, d + 1)].sum()
        return total

    def fixed_point(self, tol: float = 1e-12, max_iter: int = 10**6) -> tuple[float, float, int, bool]:
        mu = 1.0
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            nxt = min(self.update(mu), mu)
            if abs(nxt - mu) < tol:
                mu = nxt
                converged = True
                break
            mu = nxt
        return mu, self.inactive_fraction(mu), it, converged

    def contagion_rho(self) -> float:
        """Derivative of the unseeded recursion at mu = 1."""
        p = self.dist.pmf
        d = np.arange(p.size, dtype=float)
        pivotal = (self._K > 0) & (self._K <= 1)
        return float(np.sum(p * d * (d - 1.0) * pivotal) / self.dist.mean)


def single_community_equivalent(model: ModelSpec,
                                tail_tol: float = 1e-12) -> SingleCommunityModel:
    """Collapse a fully symmetric Poisson model to one community.

    Requires the hypotheses of both reductions; the equivalent internal law
    is Poisson with the sum of the internal and cross rates.
    """
    poisson_reduction(model)
    symmetric_reduction(model)
    ok1, lam1 = _is_poissonish(model.p1)
    okm, lamm = _is_poissonish(model.pm)
    if not (ok1 and okm):
        raise ValueError("Poisson internal and cross laws required")
    lam = lam1 + lamm
    if lam <= 0:
        raise ValueError("total rate must be positive")
    dist = DegreeDistribution.poisson(lam, tail_tol=tail_tol)
    threshold_fn = lambda d: model.threshold.value(1, d, 0)
    alpha_fn = lambda d: alpha_of(model.seeding, model, 1, d, 0)
    return SingleCommunityModel(dist, threshold_fn, alpha_fn)
