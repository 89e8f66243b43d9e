"""Discounted and ergodic solves of the controlled chain by Howard policy iteration,
plus nested-domain comparisons, vanishing-discount estimates and a Hoelder probe."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate, optimize

from .geometry import Domain, Grid, build_grid, lattice_compatible, node_map, scale_domain
from .io_utils import write_csv
from .lagrangian import LagrangianSpec
from .markov_chain import AssemblyError, DiscreteMDP, assemble_mdp

log = logging.getLogger(__name__)

__all__ = [
    "AssemblyError", "DiscreteMDP", "assemble_mdp", "ValueField", "ErgodicSolution",
    "DivergenceError", "ComparisonViolation", "SingularPolicyError", "solve_discounted",
    "solve_ergodic_policy", "stationary_distribution", "occupation_measure",
    "discount_eigen_estimate", "nested_domain_gap", "nested_domain_sweep", "NestedDomainReport",
    "modulus_of_continuity", "HoelderFit", "eigenvalue_bracket", "write_field_csv",
]


class DivergenceError(RuntimeError):
    pass


class ComparisonViolation(RuntimeError):
    pass


class SingularPolicyError(RuntimeError):
    pass


@dataclass
class ValueField:
    grid: Grid
    u: np.ndarray
    delta: float
    residual: float
    iterations: int
    policy: np.ndarray
    history: list = field(default_factory=list)
    mdp: DiscreteMDP | None = field(default=None, repr=False)

    @property
    def at_origin(self) -> float:
        return float(self.u[self.grid.origin_index])


@dataclass
class ErgodicSolution:
    grid: Grid
    c: float
    u: np.ndarray          # normalized u(0) = 0
    policy: np.ndarray
    residual: float
    iterations: int
    mdp: DiscreteMDP | None = field(default=None, repr=False)


def _scale(mdp: DiscreteMDP, u: np.ndarray, delta: float) -> float:
    return max(1.0, float(np.max(np.abs(mdp.f_nodes))), delta * float(np.max(np.abs(u))))


def _policy_iteration(mdp: DiscreteMDP, delta: float, tol: float, max_iter: int, u0=None):
    n = mdp.n
    u = np.full(n, mdp.f_nodes.min() / delta) if u0 is None else np.asarray(u0, dtype=float).copy()
    v, g = mdp.greedy(u)
    I = sp.identity(n, format="csr")
    history = []
    for it in range(1, max_iter + 1):
        A = mdp.operator(v)
        L = mdp.stage_cost(np.arange(n), v)
        u = spla.spsolve((delta * I + A).tocsc(), L)
        v, g = mdp.greedy(u)
        res = float(np.max(np.abs(delta * u + g - mdp.f_nodes)))
        history.append(res)
        scale = _scale(mdp, u, delta)
        if res <= tol * scale:
            return u, v, res, it, history
        # rounding floor: Newton steps stop improving once the policy is settled
        if it >= 3 and res >= history[-2] and res <= 1e3 * tol * scale:
            return u, v, res, it, history
    raise DivergenceError(f"policy iteration did not converge in {max_iter} steps; last residual {history[-1]:.3e}")


def solve_discounted(mdp: DiscreteMDP, delta: float, tol: float | None = None, max_iter: int = 200,
                     u0: np.ndarray | None = None, max_doublings: int = 3) -> ValueField:
    """Solve delta u + max_v [A_v u - L(x, v)] = 0 with the state-constraint control sets.

    The truncation V_max doubles (at most ``max_doublings`` times) if the optimal control
    reaches it."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if tol is None:
        tol = 1e-10 if mdp.dim == 1 else 1e-8
    for _ in range(max_doublings + 1):
        u, v, res, it, hist = _policy_iteration(mdp, delta, tol, max_iter, u0)
        if not mdp.policy_at_bound(v):
            break
        log.info("optimal control hit V_max=%g; doubling", mdp.V_max)
        mdp = mdp.with_velocity_bound(2 * mdp.V_max)
    return ValueField(mdp.grid, u, delta, res, it, v, hist, mdp)


def stationary_distribution(mdp: DiscreteMDP, policy: np.ndarray) -> np.ndarray:
    """Invariant law of the chain under ``policy`` (A^T mu = 0, sum mu = 1)."""
    A = mdp.operator(policy).T.tolil()
    i0 = mdp.grid.origin_index
    A[i0, :] = np.ones(mdp.n)
    rhs = np.zeros(mdp.n)
    rhs[i0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            mu = spla.spsolve(A.tocsc(), rhs)
        except spla.MatrixRankWarning as exc:
            raise SingularPolicyError("policy has more than one recurrent class") from exc
    mu[np.abs(mu) < 1e-300] = 0.0
    return mu


def occupation_measure(mdp: DiscreteMDP, policy: np.ndarray, delta: float, z: int) -> np.ndarray:
    """Discounted occupation law from node z: delta e_z^T (delta I + A)^(-1)."""
    M = (delta * sp.identity(mdp.n, format="csr") + mdp.operator(policy)).T.tocsc()
    rhs = np.zeros(mdp.n)
    rhs[z] = delta
    return spla.spsolve(M, rhs)


def solve_ergodic_policy(mdp: DiscreteMDP, tol: float | None = None, max_iter: int = 200,
                         policy0: np.ndarray | None = None, warm_delta: float = 1e-3) -> ErgodicSolution:
    """Average-cost policy iteration for max_v [A_v u - L(x, v)] = c with u(0) = 0."""
    if tol is None:
        tol = 1e-10 if mdp.dim == 1 else 1e-8
    if policy0 is None:
        policy0 = solve_discounted(mdp, warm_delta, tol=1e-8).policy
    n, i0 = mdp.n, mdp.grid.origin_index
    v = np.asarray(policy0, dtype=float).reshape(n, -1) if mdp.dim > 1 else np.asarray(policy0, dtype=float).reshape(n)
    history = []
    for it in range(1, max_iter + 1):
        A = mdp.operator(v).tolil()
        A[:, i0] = -np.ones((n, 1))
        L = mdp.stage_cost(np.arange(n), v)
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                sol = spla.spsolve(A.tocsc(), L)
            except spla.MatrixRankWarning as exc:
                raise SingularPolicyError("average-cost policy system is singular") from exc
        if not np.all(np.isfinite(sol)):
            raise SingularPolicyError("average-cost policy system is singular")
        c = float(sol[i0])
        u = sol.copy()
        u[i0] = 0.0
        v_new, g = mdp.greedy(u)
        res = float(np.max(np.abs(g - mdp.f_nodes - c)))
        history.append(res)
        scale = max(1.0, float(np.max(np.abs(mdp.f_nodes))), abs(c))
        done = res <= tol * scale or (it >= 3 and res >= history[-2] and res <= 1e3 * tol * scale)
        v = v_new
        if done:
            return ErgodicSolution(mdp.grid, c, u, v, res, it, mdp)
    raise DivergenceError(f"average-cost policy iteration stalled; last residual {history[-1]:.3e}")


# ------------------------------------------------------------------ diagnostics

def eigenvalue_bracket(spec: LagrangianSpec, domain: Domain, kappa: float) -> tuple[float, float]:
    """Interval certain to contain the ergodic constant.

    Upper end: -min f, since every probability measure pays at least min f.
    Lower end: minus the long-run cost of the diffusion confined to B(0, kappa) with density
    proportional to (kappa^2 - |x|^2)^m and zero-flux drift; m is optimized."""
    dim = domain.dim
    R = domain.diameter
    xs = np.linspace(-R / 2, R / 2, 401)
    if dim == 1:
        pts = xs[:, None]
    else:
        X, Y = np.meshgrid(xs, xs)
        pts = np.c_[X.ravel(), Y.ravel()]
    inside = domain.contains(pts)
    fvals = spec.f(pts[inside])
    upper = -float(np.min(fvals))
    ball = np.sum(pts**2, axis=1) <= kappa**2
    fmax_ball = float(np.max(spec.f(pts[ball])))
    q, eps = spec.q, spec.epsilon

    def mean_cost(m):
        # radial coordinate t = |x|/kappa, weight t^(dim-1)
        def dens(t):
            return (1 - t * t) ** m * t ** (dim - 1)
        def cost(t):
            b = 2 * m * eps * t / (kappa * (1 - t * t))
            return dens(t) * b**q
        num = integrate.quad(cost, 0, 1, limit=200)[0]
        den = integrate.quad(dens, 0, 1, limit=200)[0]
        return spec.C_p * num / den

    res = optimize.minimize_scalar(mean_cost, bounds=(q - 1 + 1e-3, 20.0), method="bounded")
    lower = -fmax_ball - float(res.fun)
    return lower, upper


@dataclass
class NestedDomainReport:
    theta: float
    delta: float
    gap: np.ndarray
    max_gap: float
    min_gap: float
    points: np.ndarray
    fitted_exponent: float | None = None


def nested_domain_gap(spec: LagrangianSpec, theta: float, delta: float, h: float,
                      base: Domain | None = None, tol: float = 1e-10) -> NestedDomainReport:
    """delta (v - u) on the inner grid, v solving on ``base`` and u on (1+theta)*base, same h."""
    from .geometry import make_domain
    base = make_domain("interval", a=1.0) if base is None else base
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if not lattice_compatible(base, h, theta):
        raise ValueError(f"theta={theta} is not lattice-compatible with h={h}")
    g_in = build_grid(base, h)
    g_out = build_grid(scale_domain(base, theta), h)
    f_in = solve_discounted(assemble_mdp(g_in, spec), delta, tol=tol)
    f_out = solve_discounted(assemble_mdp(g_out, spec), delta, tol=tol)
    idx = node_map(g_in, g_out)
    gap = delta * (f_in.u - f_out.u[idx])
    floor = 10 * tol * max(1.0, float(np.max(np.abs(delta * f_in.u))))
    if gap.min() < -floor:
        raise ComparisonViolation(f"nested gap {gap.min():.3e} is negative beyond tolerance")
    return NestedDomainReport(theta, delta, gap, float(gap.max()), float(gap.min()), g_in.points)


def nested_domain_sweep(spec: LagrangianSpec, thetas: Sequence[float], delta: float, h: float,
                        base: Domain | None = None) -> list[NestedDomainReport]:
    reps = [nested_domain_gap(spec, t, delta, h, base) for t in thetas]
    t = np.array([r.theta for r in reps])
    g = np.array([r.max_gap for r in reps])
    slope = float(np.polyfit(np.log(t), np.log(g), 1)[0])
    for r in reps:
        r.fitted_exponent = slope
    return reps


@dataclass
class DiscountEstimate:
    c: float
    band: float
    values: np.ndarray
    deltas: np.ndarray
    extrapolants: np.ndarray
    monotone: bool


def discount_eigen_estimate(spec: LagrangianSpec, domain: Domain, deltas: Sequence[float], h: float,
                            tol: float = 1e-10) -> DiscountEstimate:
    """Extrapolate -delta u_delta(0) to delta = 0 (first-order Richardson on successive pairs)."""
    deltas = np.asarray(deltas, dtype=float)
    if len(deltas) < 3 or np.any(np.diff(deltas) >= 0):
        raise ValueError("need a decreasing sequence of at least three discounts")
    mdp = assemble_mdp(build_grid(domain, h), spec)
    vals = np.array([-d * solve_discounted(mdp, d, tol=tol).at_origin for d in deltas])
    ext = (deltas[:-1] * vals[1:] - deltas[1:] * vals[:-1]) / (deltas[:-1] - deltas[1:])
    diffs = np.abs(np.diff(vals))
    monotone = bool(np.all(np.diff(diffs) <= 0))
    band = float(abs(ext[-1] - ext[-2]))
    if not monotone:
        warnings.warn("discounted eigenvalue estimates do not settle monotonically; widening band")
        band = float(np.ptp(ext))
    return DiscountEstimate(float(ext[-1]), band, vals, deltas, ext, monotone)


@dataclass
class HoelderFit:
    exponent: float | None
    residual: float
    distances: np.ndarray
    oscillations: np.ndarray
    degenerate: bool = False


def modulus_of_continuity(field: ValueField | np.ndarray, grid: Grid | None = None, max_levels: int = 12) -> HoelderFit:
    """Least-squares slope of log sup_{|x-y|=d} |u(x)-u(y)| against log d over dyadic
    axis-aligned distances d = 2^k h."""
    if isinstance(field, ValueField):
        u, grid = field.u, field.grid
    else:
        u = np.asarray(field, dtype=float)
    n_axis = int(np.ptp(grid.lattice[:, 0])) + 1
    ds, osc = [], []
    lat_index = grid.index
    for k in range(max_levels):
        m = 2**k
        if m > n_axis // 4:
            break
        best = 0.0
        for a in range(grid.dim):
            shift = np.zeros(grid.dim, dtype=np.int64)
            shift[a] = m
            j = np.array([lat_index.get(tuple(row), -1) for row in (grid.lattice + shift).tolist()])
            ok = j >= 0
            if np.any(ok):
                best = max(best, float(np.max(np.abs(u[j[ok]] - u[ok]))))
        ds.append(m * grid.h)
        osc.append(best)
    ds, osc = np.array(ds), np.array(osc)
    if len(ds) < 2 or np.max(osc) <= 1e-14 * max(1.0, float(np.max(np.abs(u)))):
        return HoelderFit(None, float("nan"), ds, osc, degenerate=True)
    coef, res, *_ = np.polyfit(np.log(ds), np.log(osc), 1, full=True)
    r = float(np.sqrt(res[0] / len(ds))) if len(res) else 0.0
    return HoelderFit(float(coef[0]), r, ds, osc)


def write_field_csv(path, field: ValueField) -> None:
    cols = ["x"] if field.grid.dim == 1 else ["x", "y"]
    rows = [list(pt) + [val, field.residual] for pt, val in zip(field.grid.points, field.u)]
    write_csv(path, cols + ["u", "residual"], rows)
