"""Controlled Markov chain discretization of  max_v [v.Du - C|v|^q] - f - eps*Lap u.

The control v enters the chain as drift -v. Per axis the stencil is central when
|v_k| <= V* = 2 eps / h (diffusion weight eps/h^2 on both sides, drift split evenly) and
fully upwind otherwise (no diffusion; the upwind weight |v_k|/h already exceeds it).
This keeps every weight nonnegative for any velocity. A boundary node admits only
controls whose stencil stays on the grid: along an axis with a missing neighbour the
velocity component must point inward with magnitude at least V*.

Operators are kept in rate form: (A_v u)_i = sum_k w+_k (u_i - u_{i+e_k}) + w-_k (u_i - u_{i-e_k}),
so the discounted equation reads  delta u + max_v [A_v u - L(x, v)] = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import Grid
from .lagrangian import LagrangianSpec, velocity_bound


class AssemblyError(ValueError):
    pass


@dataclass
class DiscreteMDP:
    grid: Grid
    spec: LagrangianSpec
    V_max: float
    dv: float
    velocities: np.ndarray          # nominal finite control set, shape (m, dim)
    f_nodes: np.ndarray
    exact_greedy: bool = True       # 1D: maximize over the continuum [-V_max, V_max]
    _adm: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def v_switch(self) -> float:
        """Speed above which an axis switches from central to upwind differencing."""
        return 2.0 * self.spec.epsilon / self.grid.h

    # ------------------------------------------------------------ stencils

    def weights(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rates (w_minus, w_plus), each shaped like v = (rows, dim)."""
        v = np.asarray(v, dtype=float).reshape(-1, self.dim)
        eps, h = self.spec.epsilon, self.grid.h
        vs = self.v_switch
        central = np.abs(v) <= vs
        wp = np.where(central, eps / h**2 - v / (2 * h), np.where(v < 0, -v / h, 0.0))
        wm = np.where(central, eps / h**2 + v / (2 * h), np.where(v > 0, v / h, 0.0))
        # exact zeros at the switching speed
        wp = np.where(central & (v >= vs), 0.0, wp)
        wm = np.where(central & (v <= -vs), 0.0, wm)
        return wm, wp

    def admissible(self, nodes: np.ndarray, v: np.ndarray) -> np.ndarray:
        nodes = np.asarray(nodes)
        v = np.asarray(v, dtype=float).reshape(-1, self.dim)
        vs = self.v_switch * (1 - 1e-12)
        ok = np.ones(len(nodes), dtype=bool)
        for k in range(self.dim):
            ok &= (self.grid.nbr[k, nodes, 1] >= 0) | (v[:, k] >= vs)
            ok &= (self.grid.nbr[k, nodes, 0] >= 0) | (v[:, k] <= -vs)
        return ok

    def stage_cost(self, nodes: np.ndarray, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1, self.dim)
        speed = np.linalg.norm(v, axis=1) if self.dim > 1 else np.abs(v[:, 0])
        return self.spec.C_p * speed**self.spec.q + self.f_nodes[nodes]

    def rows(self, nodes: np.ndarray, v: np.ndarray) -> sp.csr_matrix:
        """Rate-form rows A_v for each (node, velocity) pair, shape (len(nodes), n)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        v = np.asarray(v, dtype=float).reshape(-1, self.dim)
        R = len(nodes)
        wm, wp = self.weights(v)
        r = np.arange(R)
        ri, ci, dat = [r], [nodes], [wm.sum(axis=1) + wp.sum(axis=1)]
        for k in range(self.dim):
            for side, w in ((0, wm[:, k]), (1, wp[:, k])):
                j = self.grid.nbr[k, nodes, side]
                m = w != 0
                if np.any(m & (j < 0)):
                    bad = int(np.flatnonzero(m & (j < 0))[0])
                    raise AssemblyError(f"stencil leaves the grid at node {nodes[bad]} with v={v[bad]}")
                ri.append(r[m]); ci.append(j[m]); dat.append(-w[m])
        return sp.csr_matrix((np.concatenate(dat), (np.concatenate(ri), np.concatenate(ci))), shape=(R, self.n))

    def operator(self, policy: np.ndarray) -> sp.csr_matrix:
        return self.rows(np.arange(self.n), policy)

    def transition_probabilities(self, nodes, v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Kushner-Dupuis normalization: (p_minus, p_plus, dt) with sum of probabilities 1."""
        wm, wp = self.weights(v)
        tot = wm.sum(axis=1) + wp.sum(axis=1)
        return wm / tot[:, None], wp / tot[:, None], 1.0 / tot

    # ------------------------------------------------------------ maximization

    def greedy(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Maximizing control per node and the value max_v [A_v u - C|v|^q]."""
        if self.exact_greedy and self.dim == 1:
            return self._greedy_1d(u)
        return self._greedy_finite(u)

    def hamiltonian(self, u: np.ndarray) -> np.ndarray:
        return self.greedy(u)[1]

    def _greedy_1d(self, u):
        p, C, q = self.spec.p, self.spec.C_p, self.spec.q
        eps, h, vs, vmax = self.spec.epsilon, self.grid.h, self.v_switch, self.V_max
        lo, hi = self.grid.nbr[0, :, 0], self.grid.nbr[0, :, 1]
        um = np.where(lo >= 0, u[np.maximum(lo, 0)], u)
        up = np.where(hi >= 0, u[np.maximum(hi, 0)], u)
        Dm, Dp = (u - um) / h, (up - u) / h
        D0, lap = (up - um) / (2 * h), (up - 2 * u + um) / h**2
        # unconstrained maximizer of v*g - C|v|^q is sign(g) * (|g|/(C q))^(p-1)
        def vopt(g):
            return np.sign(g) * (np.abs(g) / (C * q)) ** (p - 1.0)
        vc = np.clip(vopt(D0), -vs, vs)
        gc = vc * D0 - C * np.abs(vc) ** q - eps * lap
        vr = np.clip(np.maximum(vs, vopt(np.maximum(Dm, 0.0))), -vmax, vmax)
        gr = vr * Dm - C * np.abs(vr) ** q
        vl = np.clip(-np.maximum(vs, vopt(np.maximum(-Dp, 0.0))), -vmax, vmax)
        gl = vl * Dp - C * np.abs(vl) ** q
        gc = np.where((lo < 0) | (hi < 0), -np.inf, gc)
        gr = np.where(lo < 0, -np.inf, gr)
        gl = np.where(hi < 0, -np.inf, gl)
        G = np.vstack([gc, gl, gr])
        V = np.vstack([vc, vl, vr])
        best = G.max(axis=0)
        # tie-break: smallest |v|, then negative first
        tied = G >= best - 1e-14 * (1.0 + np.abs(best))
        amin = np.where(tied, np.abs(V), np.inf).min(axis=0)
        cand = tied & (np.abs(V) <= amin)
        k = np.argmin(np.where(cand, (V > 0).astype(float), 2.0), axis=0)
        cols = np.arange(len(u))
        return V[k, cols], G[k, cols]

    def _adm_mask(self) -> np.ndarray:
        if self._adm is None:
            m = len(self.velocities)
            nodes = np.repeat(np.arange(self.n), m)
            vv = np.tile(self.velocities, (self.n, 1))
            self._adm = self.admissible(nodes, vv).reshape(self.n, m)
        return self._adm

    def _greedy_finite(self, u):
        V = self.velocities
        wm, wp = self.weights(V)                         # (m, dim)
        adm = self._adm_mask()
        G = np.zeros((self.n, len(V)))
        for k in range(self.dim):
            lo, hi = self.grid.nbr[k, :, 0], self.grid.nbr[k, :, 1]
            dm = u - np.where(lo >= 0, u[np.maximum(lo, 0)], u)
            dp = u - np.where(hi >= 0, u[np.maximum(hi, 0)], u)
            G += dm[:, None] * wm[None, :, k] + dp[:, None] * wp[None, :, k]
        speed = np.linalg.norm(V, axis=1)
        G -= self.spec.C_p * speed[None, :] ** self.spec.q
        G[~adm] = -np.inf
        k = np.argmax(G, axis=1)                         # velocities are pre-sorted for tie-breaks
        cols = np.arange(self.n)
        return V[k].copy(), G[cols, k]

    # ------------------------------------------------------------ variants

    def with_velocity_bound(self, V_max: float) -> "DiscreteMDP":
        return assemble_mdp(self.grid, self.spec, V_max, self.dv * V_max / self.V_max,
                            exact_greedy=self.exact_greedy)

    def policy_at_bound(self, policy: np.ndarray) -> bool:
        return bool(np.any(np.max(np.abs(policy.reshape(-1, self.dim)), axis=1) >= self.V_max * (1 - 1e-12)))


def _sorted_velocity_set(axis: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        V = axis[:, None]
    else:
        V = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    # smallest speed first, then negative components first
    order = np.lexsort(tuple((V[:, k] > 0) for k in range(dim - 1, -1, -1)) + (np.round(np.linalg.norm(V, axis=1), 12),))
    return V[order]


def assemble_mdp(grid: Grid, spec: LagrangianSpec, V_max: float | None = None, dv: float | None = None,
                 exact_greedy: bool | None = None, n_half: int | None = None) -> DiscreteMDP:
    """Build the chain on ``grid``. Without V_max the a-priori bound from the Lagrangian is used;
    the nominal velocity set is uniform with spacing dv (0 and +-V* included)."""
    if spec.p <= 2:
        raise AssemblyError("the controlled-chain pipeline needs p > 2")
    f_nodes = spec.f(grid.points)
    vs = 2.0 * spec.epsilon / grid.h
    if V_max is None:
        V_max = velocity_bound(spec, grid.h, float(np.max(np.abs(f_nodes))))
    V_max = max(float(V_max), 2.0 * vs)
    if n_half is None:
        n_half = 20 if grid.dim == 1 else 12
    if dv is None:
        dv = V_max / n_half
    k = int(np.ceil(V_max / dv - 1e-9))
    axis = dv * np.arange(-k, k + 1)
    axis = np.clip(axis, -V_max, V_max)
    axis = np.unique(np.r_[axis, -vs, vs])
    if exact_greedy is None:
        exact_greedy = grid.dim == 1
    mdp = DiscreteMDP(grid=grid, spec=spec, V_max=V_max, dv=dv, velocities=_sorted_velocity_set(axis, grid.dim),
                      f_nodes=f_nodes, exact_greedy=exact_greedy)
    adm = mdp._adm_mask()
    if not np.all(adm.any(axis=1)):
        bad = int(np.flatnonzero(~adm.any(axis=1))[0])
        raise AssemblyError(f"node {bad} at {grid.points[bad]} has no admissible velocity")
    wm, wp = mdp.weights(mdp.velocities)
    if np.any(wm < 0) or np.any(wp < 0):
        j = int(np.flatnonzero((wm < 0).any(axis=1) | (wp < 0).any(axis=1))[0])
        raise AssemblyError(f"negative transition weight for v={mdp.velocities[j]}")
    return mdp
