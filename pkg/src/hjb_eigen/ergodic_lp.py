"""Ergodic constant of the controlled chain as a linear program, its dual stationary
measures, one-sided derivatives in the dilation parameter, and eigenvalue curves.

Primal:  minimize c  subject to  A_r u - c <= L_r  for every admissible (node, velocity) row r.
Dual:    maximize -<mu, L>  over mu >= 0, sum mu = 1, A^T mu = 0  (stationary state-action laws).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from .geometry import (Domain, Grid, ScalingSchedule, build_grid, dilated_grid, lattice_compatible,
                       make_domain, scale_domain)
from .hjb_solver import (DivergenceError, SingularPolicyError, solve_discounted, solve_ergodic_policy,
                         stationary_distribution)
from .io_utils import write_csv
from .lagrangian import LagrangianSpec, radial_gradient_pairing
from .markov_chain import DiscreteMDP, assemble_mdp

log = logging.getLogger(__name__)

HIGHS_OPTIONS = dict(primal_feasibility_tolerance=1e-9, dual_feasibility_tolerance=1e-9)


class FormulationError(RuntimeError):
    pass


class ScalingMismatch(ValueError):
    pass


# ------------------------------------------------------------------ constraint system

@dataclass
class LPConstraintSystem:
    nodes: np.ndarray      # (R,)
    vel: np.ndarray        # (R, dim)
    A: sp.csr_matrix       # (R, n) rate rows
    L: np.ndarray          # (R,)
    n: int

    @property
    def rates(self) -> np.ndarray:
        # the diagonal entry of each row is its only positive entry: the total jump rate
        return np.asarray(self.A.maximum(0).sum(axis=1)).ravel()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.A.sum(axis=1)).ravel()

    def slack(self, u: np.ndarray, c: float) -> np.ndarray:
        return c + self.L - self.A @ u

    def extend(self, mdp: DiscreteMDP, nodes, vel) -> "LPConstraintSystem":
        nodes = np.asarray(nodes, dtype=np.int64)
        vel = np.asarray(vel, dtype=float).reshape(len(nodes), -1)
        have = {(int(i), tuple(np.round(v, 13))) for i, v in zip(self.nodes, self.vel)}
        new = [k for k, (i, v) in enumerate(zip(nodes, vel)) if (int(i), tuple(np.round(v, 13))) not in have]
        if not new:
            return self
        new = np.array(sorted(set(new)))
        # also dedupe within the batch
        seen, keep = set(), []
        for k in new:
            key = (int(nodes[k]), tuple(np.round(vel[k], 13)))
            if key not in seen:
                seen.add(key); keep.append(k)
        keep = np.array(keep)
        nn, vv = nodes[keep], vel[keep]
        return LPConstraintSystem(np.r_[self.nodes, nn], np.r_[self.vel, vv],
                                  sp.vstack([self.A, mdp.rows(nn, vv)]).tocsr(),
                                  np.r_[self.L, mdp.stage_cost(nn, vv)], self.n)


def build_constraint_system(mdp: DiscreteMDP, extra_policy: np.ndarray | None = None,
                            stride: int = 1) -> LPConstraintSystem:
    """One row per admissible (node, nominal velocity), every ``stride``-th velocity, plus the
    rows of ``extra_policy``."""
    V = mdp.velocities[::stride]
    if stride > 1:
        vs = mdp.v_switch
        sw = mdp.velocities[np.all(np.isclose(np.abs(mdp.velocities), vs) | (mdp.velocities == 0), axis=1)]
        V = np.unique(np.r_[V, sw], axis=0)
    m = len(V)
    nodes = np.repeat(np.arange(mdp.n), m)
    vel = np.tile(V, (mdp.n, 1))
    ok = mdp.admissible(nodes, vel)
    nodes, vel = nodes[ok], vel[ok]
    sysm = LPConstraintSystem(nodes, vel, mdp.rows(nodes, vel), mdp.stage_cost(nodes, vel), mdp.n)
    if extra_policy is not None:
        sysm = sysm.extend(mdp, np.arange(mdp.n), np.asarray(extra_policy).reshape(mdp.n, -1))
    return sysm


def _primal_lp(system: LPConstraintSystem, i0: int, time_limit: float = 60.0):
    """HiGHS interior point with crossover on the rate-form rows (u(origin) pinned to 0).

    Raw rows are tried first (their feasibility tolerance is absolute). If HiGHS does not
    finish, dual simplex and interior point without presolve are tried at default
    tolerances, then rows divided by their total jump rate with tighter tolerances, then the
    default HiGHS driver. Each attempt is capped at ``time_limit`` seconds. Returns (status, c, u, mu, message)."""
    n, R = system.n, len(system.L)
    keep = np.r_[np.arange(i0), np.arange(i0 + 1, n)]
    obj = np.zeros(n)
    obj[-1] = 1.0
    attempts = (
        (np.ones(R), "highs-ipm", HIGHS_OPTIONS),
        # looser defaults: the LP only proposes a basis, polishing and the certificate fix c
        (np.ones(R), "highs-ds", {}),
        (np.ones(R), "highs-ipm", dict(presolve=False)),
        (system.rates, "highs-ipm", dict(primal_feasibility_tolerance=1e-10, dual_feasibility_tolerance=1e-10)),
        (np.ones(R), "highs", HIGHS_OPTIONS),
    )
    for S, method, opts in attempts:
        opts = dict(opts, time_limit=time_limit)
        B = sp.hstack([(sp.diags(1.0 / S) @ system.A)[:, keep], sp.csr_matrix(-1.0 / S).T]).tocsc()
        res = linprog(obj, A_ub=B, b_ub=system.L / S, bounds=(None, None), method=method, options=opts)
        if res.status == 0 and res.ineqlin.marginals is not None:
            u = np.zeros(n)
            u[keep] = res.x[:-1]
            mu = -res.ineqlin.marginals / S
            return 0, float(res.x[-1]), u, np.maximum(mu, 0.0), res.message
        log.info("HiGHS %s gave status %s; trying next formulation", method, res.status)
    return res.status, np.nan, None, None, res.message


# ------------------------------------------------------------------ measures

@dataclass
class MatherMeasure:
    nodes: np.ndarray
    velocities: np.ndarray
    mass: np.ndarray
    points: np.ndarray
    scale: float = 1.0

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def triples(self):
        v = self.velocities[:, 0] if self.velocities.shape[1] == 1 else self.velocities
        return list(zip(self.points, v, self.mass))

    def node_marginal(self, n: int) -> np.ndarray:
        return np.bincount(self.nodes, weights=self.mass, minlength=n)


def _measure(mdp: DiscreteMDP, nodes, vel, mass, tol: float = 0.0) -> MatherMeasure:
    nodes, mass = np.asarray(nodes), np.asarray(mass, dtype=float)
    vel = np.asarray(vel, dtype=float).reshape(len(nodes), -1)
    keep = mass > tol
    scale = 1.0 if mdp.grid.domain is None else mdp.grid.domain.scale
    return MatherMeasure(nodes[keep], vel[keep], mass[keep], mdp.grid.points[nodes[keep]], scale)


def mather_pairing(mu: MatherMeasure, g: Callable | float) -> float:
    """<mu, g> = sum of mass * g(x, v)."""
    if np.isscalar(g):
        return float(g) * mu.total
    v = mu.velocities[:, 0] if mu.velocities.shape[1] == 1 else mu.velocities
    return float(np.dot(mu.mass, np.asarray(g(mu.points, v), dtype=float)))


def stationarity_residual(mdp: DiscreteMDP, mu: MatherMeasure) -> float:
    A = mdp.rows(mu.nodes, mu.velocities)
    return float(np.max(np.abs(A.T @ mu.mass)))


# ------------------------------------------------------------------ main solve

@dataclass
class EigenResult:
    c_h: float
    u: np.ndarray
    measure: MatherMeasure
    status: str
    duality_gap: float
    c_primal: float
    c_dual: float
    c_lp: float
    lp_measure: MatherMeasure | None
    stationarity: float
    system: LPConstraintSystem = field(repr=False)
    mdp: DiscreteMDP = field(repr=False)
    policy: np.ndarray = field(repr=False)
    rounds: int = 1

    @property
    def grid(self) -> Grid:
        return self.mdp.grid


def _polish(mdp: DiscreteMDP, starts):
    """Average-cost policy iteration from the first start that keeps a single recurrent class.
    A control sitting exactly on the central/upwind switch has a zero-weight side, which can
    cut the chain in two; the later starts avoid such LP vertices."""
    for k, pol in enumerate(starts):
        try:
            return solve_ergodic_policy(mdp, policy0=pol)
        except SingularPolicyError:
            if k == len(starts) - 1:
                raise
            log.info("policy start %d is multichain; trying the next one", k)


def ergodic_lp_solve(mdp: DiscreteMDP, max_rounds: int | None = None, stride: int | None = None,
                     cut_tol: float = 1e-9) -> EigenResult:
    """Minimal c admitting a discrete subsolution, with a certified dual stationary measure.

    The LP over the nominal velocity rows (plus the rows of a policy-iteration seed) is
    solved by HiGHS; its basis policy is then polished by exact policy evaluation, giving
    (u*, c*) and the invariant law mu* of the polished policy. The primal certificate is
    max over nodes of the exact Hamiltonian residual at u* (a bound over every admissible
    control, not only the LP rows); the dual certificate is -<mu*, L>. If they disagree,
    the maximizing rows at u* are added and the LP is re-solved."""
    i0 = mdp.grid.origin_index
    if stride is None:
        # 2D velocity sets are large; start sparse and let the cuts add the active rows
        stride = 1 if mdp.dim == 1 else max(1, len(mdp.velocities) // 40)
    if max_rounds is None:
        max_rounds = 6 if stride == 1 else 20
    try:
        seed_policy = solve_ergodic_policy(mdp).policy
    except (SingularPolicyError, DivergenceError):
        seed_policy = solve_discounted(mdp, 1e-3, tol=1e-8).policy
    system = build_constraint_system(mdp, seed_policy, stride=stride)
    best = None
    for rnd in range(1, max_rounds + 1):
        status, c_lp, u_lp, mu_lp, msg = _primal_lp(system, i0)
        if status != 0:
            if best is None:
                raise FormulationError(f"ergodic LP failed (status {status}): {msg}")
            # the certified pair from the previous round stands; its gap is reported
            log.warning("ergodic LP failed in cutting round %d (status %s); keeping round %d", rnd, status, best[-1])
            break
        # basis policy: heaviest dual row per node, maximizing control elsewhere
        greedy_lp = mdp.greedy(u_lp)[0]
        pol = greedy_lp.reshape(mdp.n, -1).copy()
        order = np.argsort(mu_lp, kind="stable")
        heavy = mu_lp[order] > 0
        pol[system.nodes[order][heavy]] = system.vel[order][heavy]
        pol = pol[:, 0] if mdp.dim == 1 else pol
        exact = _polish(mdp, (pol, greedy_lp, seed_policy))
        mu_pol = stationary_distribution(mdp, exact.policy)
        v_best, g = mdp.greedy(exact.u)
        c_primal = float(np.max(g - mdp.f_nodes))
        L_pol = mdp.stage_cost(np.arange(mdp.n), exact.policy)
        c_dual = -float(mu_pol @ L_pol)
        gap = c_primal - c_dual
        prev_gap = np.inf if best is None else best[2] - best[3]
        if gap < prev_gap:
            best = (exact, mu_pol, c_primal, c_dual, c_lp, mu_lp, len(system.L), rnd)
        system = system.extend(mdp, np.arange(mdp.n), exact.policy.reshape(mdp.n, -1))
        # stop when certified, or when a round of cuts no longer halves the gap
        if gap <= cut_tol * max(1.0, abs(exact.c)) or gap > 0.5 * prev_gap:
            break
        system = system.extend(mdp, np.arange(mdp.n), v_best.reshape(mdp.n, -1))

    exact, mu_pol, c_primal, c_dual, c_lp, mu_lp, n_lp, rnd = best
    measure = _measure(mdp, np.arange(mdp.n), exact.policy, mu_pol)
    stat = stationarity_residual(mdp, measure)
    lp_measure = _measure(mdp, system.nodes[:n_lp], system.vel[:n_lp], mu_lp)
    return EigenResult(c_h=exact.c, u=exact.u, measure=measure, status="optimal",
                       duality_gap=c_primal - c_dual, c_primal=c_primal, c_dual=c_dual, c_lp=c_lp,
                       lp_measure=lp_measure, stationarity=stat, system=system, mdp=mdp,
                       policy=exact.policy, rounds=rnd)


# ------------------------------------------------------------------ optimal face

@dataclass
class DerivativeReport:
    c_minus: float
    c_plus: float
    measure_minus: MatherMeasure
    measure_plus: MatherMeasure
    slack: float
    stationarity: float


def _polish_face_measure(system: LPConstraintSystem, mu: np.ndarray, i0: int) -> np.ndarray:
    """Nearest point to mu (on its support) satisfying A^T mu = 0 and sum mu = 1 exactly."""
    S = np.flatnonzero(mu > 1e-14 * max(mu.max(), 1e-300))
    AS = system.A[S].T.tocsr()                                   # (n, |S|)
    keep = np.r_[np.arange(i0), np.arange(i0 + 1, system.n)]
    M = sp.vstack([AS[keep], sp.csr_matrix(np.ones((1, len(S))))]).tocsr()
    b = np.zeros(M.shape[0])
    b[-1] = 1.0
    r = b - M @ mu[S]
    z = spla.lsqr(M, r, atol=1e-16, btol=1e-16, iter_lim=20 * M.shape[1])[0]
    out = np.zeros_like(mu)
    out[S] = np.maximum(mu[S] + z, 0.0)
    out /= out.sum()
    before = np.max(np.abs(system.A.T @ (mu / mu.sum())))
    after = np.max(np.abs(system.A.T @ out))
    return out if after <= before else mu / mu.sum()


def face_optimize(result: EigenResult, objective: np.ndarray, slack: float = 1e-9,
                  relax: bool = True) -> np.ndarray:
    """Minimize <mu, objective> over stationary probability laws on the LP rows that are
    optimal up to ``slack``: sum_r mu_r s_r <= slack with s_r the primal row slack."""
    system, i0 = result.system, result.mdp.grid.origin_index
    s = np.maximum(system.slack(result.u, result.c_h), 0.0)
    keep = np.r_[np.arange(i0), np.arange(i0 + 1, system.n)]
    Aeq = sp.vstack([system.A.T.tocsr()[keep], sp.csr_matrix(np.ones((1, len(s))))]).tocsc()
    beq = np.zeros(Aeq.shape[0])
    beq[-1] = 1.0
    for attempt in range(2 if relax else 1):
        sl = slack * max(1.0, abs(result.c_h)) * (100.0 ** attempt)
        res = linprog(objective, A_ub=sp.csr_matrix(s), b_ub=[sl], A_eq=Aeq, b_eq=beq,
                      bounds=(0, None), method="highs-ipm", options=HIGHS_OPTIONS)
        if res.status == 0:
            return _polish_face_measure(system, res.x, i0)
        log.info("face LP status %s with slack %g; relaxing", res.status, sl)
    raise FormulationError("optimal-face LP infeasible even after relaxing the slack")


def onesided_derivatives(result: EigenResult | DiscreteMDP, spec: LagrangianSpec | None = None,
                         slack: float = 1e-9) -> DerivativeReport:
    """(c'_-, c'_+) at the current domain: min and max of <mu, (-x, v).grad L> over the optimal face."""
    if isinstance(result, DiscreteMDP):
        result = ergodic_lp_solve(result)
    spec = result.mdp.spec if spec is None else spec
    system = result.system
    v = system.vel[:, 0] if system.vel.shape[1] == 1 else system.vel
    P = radial_gradient_pairing(spec, result.mdp.grid.points[system.nodes], v)
    mu_lo = face_optimize(result, P, slack)
    mu_hi = face_optimize(result, -P, slack)
    lo, hi = float(mu_lo @ P), float(mu_hi @ P)
    stat = max(np.max(np.abs(system.A.T @ mu_lo)), np.max(np.abs(system.A.T @ mu_hi)))
    m_lo = _measure(result.mdp, system.nodes, system.vel, mu_lo)
    m_hi = _measure(result.mdp, system.nodes, system.vel, mu_hi)
    return DerivativeReport(min(lo, hi), max(lo, hi), m_lo, m_hi, slack, float(stat))


def random_face_measures(result: EigenResult, k: int = 5, seed: int = 0, slack: float = 1e-9) -> list[MatherMeasure]:
    """Optimal-face measures obtained by optimizing random linear objectives."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        mu = face_optimize(result, rng.standard_normal(len(result.system.nodes)), slack)
        out.append(_measure(result.mdp, result.system.nodes, result.system.vel, mu))
    return out


# ------------------------------------------------------------------ curves

def sample_mdp(spec: LagrangianSpec, base: Domain, h: float, r: float, grid_mode: str = "fixed",
               base_grid: Grid | None = None) -> DiscreteMDP:
    """Chain on (1+r)*base: ``fixed`` keeps spacing h (needs lattice compatibility),
    ``dilated`` keeps the node count and stretches the spacing to (1+r)h."""
    if grid_mode == "fixed":
        if not lattice_compatible(base, h, r):
            raise ScalingMismatch(f"r={r} is not lattice-compatible with h={h}; use grid_mode='dilated'")
        return assemble_mdp(build_grid(scale_domain(base, r), h), spec)
    if grid_mode == "dilated":
        g0 = build_grid(base, h) if base_grid is None else base_grid
        return assemble_mdp(dilated_grid(g0, 1.0 + r), spec)
    raise ValueError(f"unknown grid mode {grid_mode!r}")


@dataclass
class EigenCurve:
    lambdas: np.ndarray
    c: np.ndarray
    r: np.ndarray
    dc_forward: np.ndarray
    dc_backward: np.ndarray
    cprime_minus: np.ndarray      # d/dlambda, from the face LP
    cprime_plus: np.ndarray
    pairing_minus: np.ndarray     # derivative along relative dilation of the sampled domain
    pairing_plus: np.ndarray
    lipschitz: float
    grid_mode: str
    results: list = field(default_factory=list, repr=False)
    failures: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        ok = np.isfinite(self.c)
        return bool(np.all(np.diff(self.c[ok]) >= -1e-12 * np.maximum(1.0, np.abs(self.c[ok][1:]))))

    def second_differences(self) -> tuple[np.ndarray, np.ndarray]:
        lam, c = self.lambdas, self.c
        if len(lam) < 3:
            return np.array([]), np.array([])
        d1, d2 = np.diff(lam)[:-1], np.diff(lam)[1:]
        sd = 2 * (d1 * c[2:] - (d1 + d2) * c[1:-1] + d2 * c[:-2]) / (d1 * d2 * (d1 + d2))
        return lam[1:-1], sd

    def at(self, lam: float) -> int:
        return int(np.argmin(np.abs(self.lambdas - lam)))


def eigencurve(spec: LagrangianSpec, domain: Domain | None = None, schedule: ScalingSchedule | None = None,
               h: float = 1 / 200, grid_mode: str = "fixed", derivatives: bool = True) -> EigenCurve:
    domain = make_domain("interval", a=1.0) if domain is None else domain
    schedule = ScalingSchedule(gamma=1.0) if schedule is None else schedule
    schedule.check()
    lams = np.array(sorted(schedule.samples), dtype=float)
    base_grid = build_grid(domain, h) if grid_mode == "dilated" else None
    nan = np.full(len(lams), np.nan)
    c, pm, pp = nan.copy(), nan.copy(), nan.copy()
    rs = np.array([schedule.r(l) for l in lams])
    results, failures = [], {}
    for k, (lam, r) in enumerate(zip(lams, rs)):
        try:
            mdp = sample_mdp(spec, domain, h, r, grid_mode, base_grid)
            res = ergodic_lp_solve(mdp)
            c[k] = res.c_h
            if derivatives:
                d = onesided_derivatives(res)
                pm[k], pp[k] = d.c_minus, d.c_plus
            results.append(res)
        except Exception as exc:  # partial curve with annotations
            failures[float(lam)] = f"{type(exc).__name__}: {exc}"
            results.append(None)
    # chain rule: d/dlambda = r'(lambda) / (1 + r) * (relative-dilation derivative)
    dr = np.array([(schedule.r(l + 1e-6) - schedule.r(l - 1e-6)) / 2e-6 for l in lams])
    fac = dr / (1.0 + rs)
    cm = np.where(fac >= 0, pm, pp) * fac
    cp = np.where(fac >= 0, pp, pm) * fac
    q = np.diff(c) / np.diff(lams)
    fwd = np.r_[q, np.nan]
    bwd = np.r_[np.nan, q]
    lip = float(np.nanmax(np.abs(q))) if len(q) else 0.0
    return EigenCurve(lams, c, rs, fwd, bwd, cm, cp, pm, pp, lip, grid_mode, results, failures)


def derivative_display_check(curve: EigenCurve, spec: LagrangianSpec) -> dict:
    """For constant f: compare the face-LP derivative with -q c(lambda) and -q c(lambda)/(1+lambda)."""
    q = spec.q
    lam, c = curve.lambdas, curve.c
    d = 0.5 * (curve.cprime_minus + curve.cprime_plus)
    rel = 0.5 * (curve.pairing_minus + curve.pairing_plus)
    return {
        "dc_dlambda_minus_neg_qc": float(np.nanmax(np.abs(d + q * c))),
        "dc_dlambda_minus_neg_qc_over_1plus": float(np.nanmax(np.abs(d + q * c / (1 + curve.r)))),
        "relative_dilation_minus_neg_qc": float(np.nanmax(np.abs(rel + q * c))),
    }


def semiconvexity_probe(curve: EigenCurve, rtol: float = 1e-9) -> float:
    """min over interior samples of (c(l-D) - 2c(l) + c(l+D)) / D^2 on an equispaced curve."""
    d = np.diff(curve.lambdas)
    if len(curve.lambdas) < 3 or np.ptp(d) > rtol * np.max(np.abs(d)):
        raise ValueError("semiconvexity probe needs at least three equispaced samples")
    D = float(np.mean(d))
    c = curve.c
    return float(np.min((c[:-2] - 2 * c[1:-1] + c[2:]) / D**2))


def scale_measure(mu: MatherMeasure, r: float, target: Grid) -> MatherMeasure:
    """Push x -> x/(1+r) forward onto ``target``; velocities unchanged, off-lattice images
    split between neighbouring nodes with linear (multilinear in 2D) weights."""
    s = 1.0 + r
    if not s > 0:
        raise ScalingMismatch("1 + r must be positive")
    y = mu.points / s / target.h
    base = np.floor(y + 1e-12).astype(np.int64)
    frac = np.clip(y - base, 0.0, 1.0)
    frac[frac < 1e-12] = 0.0
    dim = target.dim
    out_nodes, out_vel, out_mass = [], [], []
    for corner in np.ndindex(*([2] * dim)):
        corner = np.array(corner)
        w = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=1)
        use = w > 0
        if not np.any(use):
            continue
        lat = base[use] + corner
        idx = np.array([target.index.get(tuple(row), -1) for row in lat.tolist()])
        if np.any(idx < 0):
            raise ScalingMismatch("scaled measure has mass outside the target grid")
        out_nodes.append(idx); out_vel.append(mu.velocities[use]); out_mass.append(mu.mass[use] * w[use])
    nodes = np.concatenate(out_nodes)
    vel = np.concatenate(out_vel)
    mass = np.concatenate(out_mass)
    # merge duplicate (node, velocity) atoms
    key = np.c_[nodes, np.round(vel, 13)]
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    merged = np.bincount(inv.ravel(), weights=mass)
    nodes_u = uniq[:, 0].astype(np.int64)
    vel_u = vel[np.array([np.flatnonzero(inv.ravel() == k)[0] for k in range(len(uniq))])]
    return MatherMeasure(nodes_u, vel_u, merged, target.points[nodes_u], mu.scale / s)


# ------------------------------------------------------------------ boundary-row experiment

def boundary_row_experiment(spec: LagrangianSpec, h: float = 1 / 100, a: float = 1.0) -> dict:
    """Compare the inward-control boundary rows against two alternatives:
    no rows at boundary nodes, and reflected rows (missing neighbour replaced by the node itself,
    any control admissible)."""
    g = build_grid(make_domain("interval", a=a), h)
    mdp = assemble_mdp(g, spec)
    out = {"inward": ergodic_lp_solve(mdp).c_h}
    full = build_constraint_system(mdp)
    interior = ~g.boundary[full.nodes]
    sub = LPConstraintSystem(full.nodes[interior], full.vel[interior], full.A[interior], full.L[interior], full.n)
    status, c, *_ = _primal_lp(sub, g.origin_index)
    out["interior_only"] = c if status == 0 else f"status {status}"
    # reflected: every nominal control, weight towards a missing neighbour dropped
    V = mdp.velocities
    nodes = np.repeat(np.arange(g.n), len(V))
    vel = np.tile(V, (g.n, 1))
    wm, wp = mdp.weights(vel)
    lo, hi = g.nbr[0, nodes, 0], g.nbr[0, nodes, 1]
    wm[:, 0] = np.where(lo < 0, 0.0, wm[:, 0])
    wp[:, 0] = np.where(hi < 0, 0.0, wp[:, 0])
    tot = wm[:, 0] + wp[:, 0]
    ok = tot > 0
    r = np.arange(ok.sum())
    nd, wmo, wpo = nodes[ok], wm[ok, 0], wp[ok, 0]
    ri = np.r_[r, r[lo[ok] >= 0], r[hi[ok] >= 0]]
    ci = np.r_[nd, lo[ok][lo[ok] >= 0], hi[ok][hi[ok] >= 0]]
    dat = np.r_[wmo + wpo, -wmo[lo[ok] >= 0], -wpo[hi[ok] >= 0]]
    A = sp.csr_matrix((dat, (ri, ci)), shape=(len(r), g.n))
    refl = LPConstraintSystem(nd, vel[ok], A, mdp.stage_cost(nd, vel[ok]), g.n)
    status, c, *_ = _primal_lp(refl, g.origin_index)
    out["reflected"] = c if status == 0 else f"status {status}"
    return out


# ------------------------------------------------------------------ export

def write_curve_csv(path, curve: EigenCurve) -> None:
    rows = zip(curve.lambdas, curve.c, curve.dc_forward, curve.dc_backward, curve.cprime_minus, curve.cprime_plus)
    write_csv(path, ["lambda", "c", "dc_forward", "dc_backward", "cprime_minus", "cprime_plus"], rows)


def write_measure_csv(path, mu: MatherMeasure) -> None:
    dim = mu.points.shape[1]
    xh = ["x"] if dim == 1 else ["x", "y"]
    vh = ["v"] if dim == 1 else ["vx", "vy"]
    rows = [list(p) + list(v) + [m] for p, v, m in zip(mu.points, mu.velocities, mu.mass)]
    write_csv(path, xh + vh + ["mass"], rows)
