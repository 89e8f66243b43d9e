"""Vanishing discount on dilating domains: u^gamma = lim (u_lambda + c(0)/lambda), the offset
map C(gamma) = u^gamma - u^0, and the measure identities that tie C to the eigenvalue derivative.

Domains are (1 + gamma*lambda) * base. Each scaled problem is solved on the dilated copy of
the base grid (same lattice, spacing (1+r)h), so node i of the scaled grid is exactly the
image of base node i and the pull-back u(x) -> (1+r)^(-2) u((1+r)x) needs no interpolation.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ergodic_lp import (EigenResult, ergodic_lp_solve, mather_pairing, onesided_derivatives,
                         random_face_measures)
from .geometry import Domain, Grid, build_grid, dilated_grid, make_domain
from .hjb_solver import ValueField, occupation_measure, solve_discounted, solve_ergodic_policy
from .io_utils import write_csv
from .lagrangian import LagrangianSpec, radial_gradient_pairing
from .markov_chain import DiscreteMDP, assemble_mdp

log = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.16, 0.08, 0.04, 0.02, 0.01, 0.005)


@dataclass
class BaseProblem:
    """Ergodic data on the undilated domain shared by every (gamma, lambda) run."""

    spec: LagrangianSpec
    domain: Domain
    h: float
    grid: Grid
    mdp: DiscreteMDP
    eigen: EigenResult
    u0: np.ndarray          # ergodic solution with <mu, u0> = 0 for the computed invariant measure

    @property
    def c0(self) -> float:
        return self.eigen.c_h


def base_problem(spec: LagrangianSpec, h: float, domain: Domain | None = None) -> BaseProblem:
    domain = make_domain("interval", a=1.0) if domain is None else domain
    grid = build_grid(domain, h)
    mdp = assemble_mdp(grid, spec)
    eig = ergodic_lp_solve(mdp)
    marg = eig.measure.node_marginal(grid.n)
    u0 = eig.u - float(marg @ eig.u)
    return BaseProblem(spec, domain, h, grid, mdp, eig, u0)


@dataclass
class ChangingDomainField:
    gamma: float
    lam: float
    tilde: np.ndarray        # (1+r)^-2 u_lambda((1+r)x) + c(0)/lambda on base nodes
    field: np.ndarray        # tilde - 2 gamma c(0)
    solution: ValueField
    mdp: DiscreteMDP
    c_lam: float
    band_own: float          # max |lambda u_lambda + c(lambda)| / lambda
    band_base: float         # max |lambda u_lambda + c(0)| / (lambda + |gamma lambda|)


def changing_domain_solve(spec: LagrangianSpec, gamma: float, lam: float, h: float,
                          base: BaseProblem | None = None, tol: float = 1e-11,
                          band_limit: float | None = None) -> ChangingDomainField:
    """Solve the discounted problem with rate lambda on (1 + gamma lambda) * base and pull it back."""
    base = base_problem(spec, h) if base is None else base
    s = 1.0 + gamma * lam
    if not s > 0:
        raise ValueError("1 + gamma*lambda must be positive")
    mdp = assemble_mdp(dilated_grid(base.grid, s), spec)
    vf = solve_discounted(mdp, lam, tol=tol)
    c0 = base.c0
    tilde = vf.u / s**2 + c0 / lam
    c_lam = c0 if s == 1.0 else solve_ergodic_policy(mdp).c
    band_own = float(np.max(np.abs(lam * vf.u + c_lam))) / lam
    band_base = float(np.max(np.abs(lam * vf.u + c0))) / (lam + abs(gamma * lam))
    if band_limit is None:
        band_limit = 5.0 * (1.0 + base.domain.diameter) * (1.0 + float(np.max(np.abs(base.mdp.f_nodes))))
    if band_own > band_limit or band_base > band_limit:
        warnings.warn(f"discount band constants {band_own:.3g}, {band_base:.3g} exceed {band_limit:.3g}")
    return ChangingDomainField(gamma, lam, tilde, tilde - 2 * gamma * c0, vf, mdp, c_lam, band_own, band_base)


def richardson(values, lams, order: int = 1) -> np.ndarray:
    """Eliminate the leading powers of lambda from a sequence indexed along axis 0.

    Each pass replaces consecutive pairs (lam_{k-1}, F_{k-1}), (lam_k, F_k) by the value at
    lambda = 0 of the line through them; ``order`` passes remove lambda, ..., lambda^order."""
    vals = np.asarray(values, dtype=float)
    lams = np.asarray(lams, dtype=float)
    for k in range(1, order + 1):
        hi, lo = lams[:-k], lams[k:]
        w = (hi / (hi - lo)).reshape((-1,) + (1,) * (vals.ndim - 1))
        vals = w * vals[1:] + (1 - w) * vals[:-1]
    return vals


@dataclass
class DiscountLimitResult:
    gamma: float
    lambdas: np.ndarray
    fields: np.ndarray            # per-lambda normalized fields u_lambda-tilde + c(0)/lambda - 2 gamma c(0)
    cauchy: np.ndarray            # sup |F_k - F_{k-1}|
    extrapolated: np.ndarray      # Richardson limit field
    extrapolation_error: float    # sup difference of the last two extrapolants
    limit: np.ndarray             # u0 + mean offset: the nearest exact ergodic solution
    offset: float                 # mean(extrapolated - u0)
    constancy_defect: float       # sup |extrapolated - u0 - offset|
    residual: float               # ergodic residual of ``limit`` with c(0)
    residual_raw: float           # ergodic residual of ``extrapolated`` itself
    runs: list = field(default_factory=list, repr=False)

    @property
    def cauchy_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.cauchy) <= 0))


def _ergodic_residual(mdp: DiscreteMDP, u: np.ndarray, c: float) -> float:
    return float(np.max(np.abs(mdp.hamiltonian(u) - mdp.f_nodes - c)))


def ugamma_limit(spec: LagrangianSpec, gamma: float, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                 h: float = 1 / 200, base: BaseProblem | None = None, order: int = 1) -> DiscountLimitResult:
    base = base_problem(spec, h) if base is None else base
    lams = np.asarray(lambdas, dtype=float)
    if len(lams) < 2 or np.any(np.diff(lams) >= 0):
        raise ValueError("lambda sequence must decrease")
    runs = [changing_domain_solve(spec, gamma, l, h, base) for l in lams]
    F = np.array([r.field for r in runs])
    cauchy = np.max(np.abs(np.diff(F, axis=0)), axis=1)
    ext_all = richardson(F, lams, order)
    ext = ext_all[-1]
    err = float(np.max(np.abs(ext_all[-1] - ext_all[-2]))) if len(ext_all) > 1 else float("nan")
    offset = float(np.mean(ext - base.u0))
    defect = float(np.max(np.abs(ext - base.u0 - offset)))
    limit = base.u0 + offset
    res = DiscountLimitResult(gamma, lams, F, cauchy, ext, err, limit, offset, defect,
                              _ergodic_residual(base.mdp, limit, base.c0),
                              _ergodic_residual(base.mdp, ext, base.c0), runs)
    if not res.cauchy_decreasing:
        warnings.warn(f"gamma={gamma}: successive differences do not decrease: {cauchy}")
    return res


@dataclass
class CGammaCurve:
    gammas: np.ndarray
    C: np.ndarray                 # mean(u^gamma - u^0) from the same runs; C(0) = 0
    defects: np.ndarray
    errors: np.ndarray            # extrapolation error estimates per gamma
    limits: dict = field(default_factory=dict, repr=False)

    @property
    def tol(self) -> float:
        return float(np.nanmax(self.errors))

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.C) < 10 * self.tol))

    def concavity_table(self) -> list[tuple[float, float, float]]:
        """(gamma_mid, C(mid) - average of neighbours, tolerance) on equispaced triples."""
        out = []
        g, C = self.gammas, self.C
        for i in range(1, len(g) - 1):
            for j in range(1, min(i, len(g) - 1 - i) + 1):
                if abs((g[i] - g[i - j]) - (g[i + j] - g[i])) < 1e-12:
                    out.append((float(g[i]), float(C[i] - 0.5 * (C[i - j] + C[i + j])), 10 * self.tol))
        return out

    @property
    def concave(self) -> bool:
        return all(d >= -t for _, d, t in self.concavity_table())

    def quotients(self) -> dict:
        """One-sided difference quotients of C at 0 with first-order Richardson refinement."""
        g, C = self.gammas, self.C
        out = {}
        for side, mask in (("plus", g > 0), ("minus", g < 0)):
            gs, Cs = g[mask], C[mask]
            order = np.argsort(np.abs(gs))[::-1]
            gs, Cs = gs[order], Cs[order]
            Q = Cs / gs
            out[side] = {"raw": float(Q[-1]) if len(Q) else float("nan"),
                         "refined": float(richardson(Q, np.abs(gs))[-1]) if len(Q) > 1 else float("nan")}
        return out


def c_of_gamma(spec: LagrangianSpec, gammas: Sequence[float] = (-0.5, -0.25, 0.0, 0.25, 0.5),
               lambdas: Sequence[float] = DEFAULT_LAMBDAS, h: float = 1 / 200,
               base: BaseProblem | None = None, order: int = 1) -> CGammaCurve:
    gammas = np.array(sorted(gammas), dtype=float)
    if not np.any(gammas == 0):
        raise ValueError("gamma samples must include 0")
    base = base_problem(spec, h) if base is None else base
    lims = {float(g): ugamma_limit(spec, g, lambdas, h, base, order) for g in gammas}
    ref = lims[0.0].extrapolated
    C = np.array([np.mean(lims[float(g)].extrapolated - ref) for g in gammas])
    defects = np.array([np.max(np.abs(lims[float(g)].extrapolated - ref - c)) for g, c in zip(gammas, C)])
    errors = np.array([lims[float(g)].extrapolation_error for g in gammas])
    curve = CGammaCurve(gammas, C, defects, errors, lims)
    big = defects > 100 * max(curve.tol, 1e-12)
    if np.any(big):
        warnings.warn(f"large constancy defect at gamma={gammas[big]}: limits may not have converged")
    return curve


@dataclass
class BackForthReport:
    cprime_minus: float
    cprime_plus: float
    neg_Cprime_minus: float
    neg_Cprime_plus: float
    mismatch_minus: float
    mismatch_plus: float
    ordered: bool
    ordering_slack: float
    linearity: float | None
    curve: CGammaCurve = field(repr=False)


def back_forth_check(spec: LagrangianSpec, h: float = 1 / 200, gammas=(-0.5, -0.25, 0.0, 0.25, 0.5),
                     lambdas=DEFAULT_LAMBDAS, base: BaseProblem | None = None, rel_tol: float = 0.02,
                     slack: float = 1e-3, curve: CGammaCurve | None = None) -> BackForthReport:
    base = base_problem(spec, h) if base is None else base
    d = onesided_derivatives(base.eigen)
    curve = c_of_gamma(spec, gammas, lambdas, h, base) if curve is None else curve
    q = curve.quotients()
    nCm, nCp = -q["minus"]["refined"], -q["plus"]["refined"]

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    mm, mp = rel(nCm, d.c_minus), rel(nCp, d.c_plus)
    ordered = (d.c_minus - slack <= nCm <= nCp + slack) and (nCp <= d.c_plus + slack)
    lin = None
    if mm <= rel_tol and mp <= rel_tol:
        cp = 0.5 * (d.c_minus + d.c_plus)
        lin = float(np.max(np.abs(curve.C + curve.gammas * cp)))
    return BackForthReport(d.c_minus, d.c_plus, nCm, nCp, mm, mp, ordered, slack, lin, curve)


# ------------------------------------------------------------------ measure identities

def pulled_back_occupation(run: ChangingDomainField, z: int) -> tuple[np.ndarray, np.ndarray]:
    """Discounted occupation law of the optimal policy on the scaled grid, started at node z,
    returned as masses on base nodes (x -> x/(1+r) is the node identity) with the velocities."""
    sol = run.solution
    sigma = occupation_measure(run.mdp, sol.policy, run.lam, z)
    return sigma, sol.policy


@dataclass
class MeasureIdentityReport:
    gamma: float
    vertices: list
    residual_a: dict          # per vertex: |<sigma, u^0>| (gamma = 0 pipeline)
    residual_b: dict          # per vertex: |gamma <mu, P> + <mu, u^gamma>|
    inequality_c: list        # gamma <mu, P> + <mu, u^gamma> for optimal-face measures (should be <= 0)
    tables: dict = field(default_factory=dict, repr=False)

    @property
    def max_a(self) -> float:
        return max(self.residual_a.values())

    @property
    def max_b(self) -> float:
        return max(self.residual_b.values())

    @property
    def max_c(self) -> float:
        return max(self.inequality_c)


def _vertex_nodes(grid: Grid, n: int = 3) -> list[int]:
    """The origin and nodes at +-1/2 of the half-width along the first axis."""
    out = [grid.origin_index]
    half = int(np.max(np.abs(grid.lattice[:, 0]))) // 2
    for sgn in (-1, 1):
        lat = [0] * grid.dim
        lat[0] = sgn * half
        k = grid.node_of(lat)
        if k >= 0 and half > 0:
            out.append(k)
    return out[:n]


def measure_identity_check(spec: LagrangianSpec, h: float = 1 / 200, gamma: float = 0.25,
                           lambdas: Sequence[float] = DEFAULT_LAMBDAS, base: BaseProblem | None = None,
                           n_face: int = 5, seed: int = 0, order: int = 2,
                           limits: dict | None = None) -> MeasureIdentityReport:
    """Residuals of the measure identities, each extrapolated to lambda = 0.

    (a) <sigma, u^0> for discounted occupation laws of the fixed-domain problem;
    (b) gamma <mu, P> + <mu, u^gamma> for occupation laws of the dilating-domain problem;
    (c) gamma <mu, P> + <mu, u^gamma> over optimal-face measures of the ergodic LP.
    Discounted laws are tagged by their starting vertex; the report keeps each vertex."""
    base = base_problem(spec, h) if base is None else base
    lams = np.asarray(lambdas, dtype=float)
    limits = {} if limits is None else limits
    for g in (0.0, gamma):
        if g not in limits:
            limits[g] = ugamma_limit(spec, g, lams, h, base, order)
        elif not np.array_equal(limits[g].lambdas, lams):
            raise ValueError("supplied limits were computed on a different lambda sequence")
    # re-extrapolate the stored fields so the identities use the requested order
    u_zero = richardson(limits[0.0].fields, lams, order)[-1]
    u_gam = richardson(limits[gamma].fields, lams, order)[-1]
    u_gam_projected = base.u0 + float(np.mean(u_gam - base.u0))
    verts = _vertex_nodes(base.grid)
    res_a, res_b, tables = {}, {}, {}
    for z in verts:
        a_vals, b_vals = [], []
        for run0, rung in zip(limits[0.0].runs, limits[gamma].runs):
            sig0, _ = pulled_back_occupation(run0, z)
            a_vals.append(float(sig0 @ u_zero))
            sig, pol = pulled_back_occupation(rung, z)
            P = radial_gradient_pairing(spec, base.grid.points, pol)
            b_vals.append(float(gamma * (sig @ P) + sig @ u_gam))
        a_vals, b_vals = np.array(a_vals), np.array(b_vals)
        ea = richardson(a_vals, lams, order)[-1]
        eb = richardson(b_vals, lams, order)[-1]
        key = float(base.grid.points[z, 0])
        res_a[key], res_b[key] = abs(float(ea)), abs(float(eb))
        tables[key] = {"lambda": lams, "a": a_vals, "b": b_vals}
    ineq = []
    P = lambda x, v: radial_gradient_pairing(spec, x, v)
    for mu in random_face_measures(base.eigen, n_face, seed=seed):
        val = gamma * mather_pairing(mu, P) + float(mu.mass @ u_gam_projected[mu.nodes])
        ineq.append(val)
    return MeasureIdentityReport(gamma, [float(base.grid.points[z, 0]) for z in verts], res_a, res_b, ineq, tables)


# ------------------------------------------------------------------ export

def write_cgamma_csv(path, curve: CGammaCurve) -> None:
    write_csv(path, ["gamma", "C", "defect"], zip(curve.gammas, curve.C, curve.defects))


def write_cauchy_csv(path, res: DiscountLimitResult) -> None:
    write_csv(path, ["lambda", "sup_residual"], zip(res.lambdas[1:], res.cauchy))
