"""Quadratic Hamiltonian: the ergodic constant from the principal Dirichlet eigenpair of
-eps^2 Lap + f, the logarithmic transform v = -eps log w, and the boundary-flux formula
for the derivative of the eigenvalue under domain dilation.

The eigenvalue ``c`` reported here is the (positive) energy lambda_1. The constant in
|Dv|^2 - f - eps Lap v = c_hj for the transformed field is c_hj = -lambda_1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Domain
from .io_utils import write_csv
from .lagrangian import RunningCost


class EigenIterationError(RuntimeError):
    pass


class NormalizationError(ValueError):
    pass


class TransformDomainError(ValueError):
    pass


@dataclass
class DirichletGrid:
    """Lattice nodes h*Z^d; ``interior`` marks unknowns, all other stored nodes are held at 0.

    1D: nodes -a + i h, i = 0..N with the two end nodes on the boundary.
    2D disk: lattice nodes strictly inside the disk; the stored exterior ring holds the zeros.
    """

    points: np.ndarray
    h: float
    interior: np.ndarray
    edges: np.ndarray          # (m, 2) lattice edges touching at least one interior node
    domain: Domain
    boundary: str = "lattice"  # 2D: "staircase" or "shortley-weller"

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def cell(self) -> float:
        return self.h ** self.dim


def dirichlet_grid(domain: Domain, h: float, boundary: str = "shortley-weller") -> DirichletGrid:
    if domain.kind == "interval":
        a = domain.half_width
        N = int(round(2 * a / h))
        if N - 1 < 32:
            raise ValueError(f"need at least 32 interior nodes, got {N - 1}")
        hh = 2 * a / N
        x = -a + hh * np.arange(N + 1)
        interior = np.ones(N + 1, dtype=bool)
        interior[[0, N]] = False
        edges = np.c_[np.arange(N), np.arange(1, N + 1)]
        return DirichletGrid(x[:, None], hh, interior, edges, domain)
    if domain.kind != "disk":
        raise ValueError("principal eigenpairs are implemented for intervals and disks")
    R = domain.half_width
    k = int(np.ceil(R / h)) + 1
    I, J = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    pts = h * np.c_[I.ravel(), J.ravel()]
    inside = np.hypot(pts[:, 0], pts[:, 1]) < R * (1 - 1e-12)
    if inside.sum() < 32:
        raise ValueError("need at least 32 interior nodes")
    side = 2 * k + 1
    idx = np.arange(side * side).reshape(side, side)
    e = np.r_[np.c_[idx[:-1, :].ravel(), idx[1:, :].ravel()], np.c_[idx[:, :-1].ravel(), idx[:, 1:].ravel()]]
    e = e[inside[e[:, 0]] | inside[e[:, 1]]]
    keep = np.zeros(len(pts), dtype=bool)
    keep[e.ravel()] = True
    new = -np.ones(len(pts), dtype=np.int64)
    new[keep] = np.arange(keep.sum())
    if boundary not in ("staircase", "shortley-weller"):
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    return DirichletGrid(pts[keep], h, inside[keep], new[e], domain, boundary)


def _axis_gap(g: DirichletGrid, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Distance from interior node i towards exterior neighbour j until the circle is crossed."""
    R = g.domain.half_width
    x, d = g.points[i], (g.points[j] - g.points[i]) / g.h
    b = np.sum(x * d, axis=1)
    t = -b + np.sqrt(b**2 - np.sum(x * x, axis=1) + R**2)
    return np.clip(t, 1e-3 * g.h, g.h)


def _operator(g: DirichletGrid, fvals: np.ndarray, eps: float) -> sp.csr_matrix:
    """-eps^2 Lap_h + f restricted to interior unknowns."""
    if g.dim == 2 and g.boundary == "shortley-weller":
        return _operator_sw(g, fvals, eps)
    idx = np.flatnonzero(g.interior)
    pos = -np.ones(len(g.points), dtype=np.int64)
    pos[idx] = np.arange(len(idx))
    w = eps**2 / g.h**2
    diag = 2 * g.dim * w + fvals[idx]
    a, b = g.edges[:, 0], g.edges[:, 1]
    both = g.interior[a] & g.interior[b]
    r = np.r_[pos[a[both]], pos[b[both]]]
    c = np.r_[pos[b[both]], pos[a[both]]]
    off = sp.csr_matrix((np.full(len(r), -w), (r, c)), shape=(len(idx), len(idx)))
    return (sp.diags(diag) + off).tocsr()


def _operator_sw(g: DirichletGrid, fvals: np.ndarray, eps: float) -> sp.csr_matrix:
    """Shortley-Weller rows: along an axis whose neighbour is outside, the boundary value 0 is
    imposed at the true crossing distance, which keeps the eigenvalue second-order accurate."""
    idx = np.flatnonzero(g.interior)
    pos = -np.ones(len(g.points), dtype=np.int64)
    pos[idx] = np.arange(len(idx))
    nb = {}
    for a, b in g.edges:
        axis = int(np.argmax(np.abs(g.points[b] - g.points[a])))
        nb[(a, axis, 1)] = b
        nb[(b, axis, 0)] = a
    rows, cols, vals = [], [], []
    diag = fvals[idx].astype(float).copy()
    for k in range(2):
        for m, i in enumerate(idx):
            lo, hi = nb[(i, k, 0)], nb[(i, k, 1)]
            hl = g.h if g.interior[lo] else float(_axis_gap(g, np.array([i]), np.array([lo]))[0])
            hr = g.h if g.interior[hi] else float(_axis_gap(g, np.array([i]), np.array([hi]))[0])
            cl, cr = 2 * eps**2 / (hl * (hl + hr)), 2 * eps**2 / (hr * (hl + hr))
            diag[m] += cl + cr
            for j, cj in ((lo, cl), (hi, cr)):
                if g.interior[j]:
                    rows.append(m); cols.append(pos[j]); vals.append(-cj)
    n = len(idx)
    return (sp.diags(diag) + sp.csr_matrix((vals, (rows, cols)), shape=(n, n))).tocsr()


@dataclass
class LinearEigenpair:
    c: float
    w: np.ndarray               # on all stored nodes, zero off the interior
    grid: DirichletGrid
    eps: float
    f: RunningCost
    residual: float
    iterations: int
    positive: bool
    normal_derivative: np.ndarray = field(default=None)   # samples of dw/dn at boundary_points
    boundary_points: np.ndarray = field(default=None)
    normals: np.ndarray = field(default=None)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell * np.sum(self.w**2)))

    @property
    def c_hj(self) -> float:
        return -self.c


def _inverse_iteration(A: sp.csr_matrix, shift: float, tol: float, max_iter: int, banded: bool):
    n = A.shape[0]
    M = A - shift * sp.identity(n, format="csr")
    if banded:
        ab = np.zeros((2, n))
        ab[0, 1:] = M.diagonal(1)
        ab[1, :] = M.diagonal()
        try:
            fac = sla.cholesky_banded(ab)
            solve = lambda b: sla.cho_solve_banded((fac, False), b)
        except np.linalg.LinAlgError:
            lu = np.zeros((3, n))
            lu[0, 1:], lu[1], lu[2, :-1] = M.diagonal(1), M.diagonal(), M.diagonal(-1)
            solve = lambda b: sla.solve_banded((1, 1), lu, b)
    else:
        solve = spla.splu(M.tocsc()).solve
    x = np.ones(n) / np.sqrt(n)
    lam, res = np.nan, np.inf
    scale = max(1.0, abs(A.diagonal()).max())
    for it in range(1, max_iter + 1):
        y = solve(x)
        x = y / np.linalg.norm(y)
        Ax = A @ x
        lam = float(x @ Ax)
        res = float(np.max(np.abs(Ax - lam * x)))
        if res <= tol * scale:
            return x, lam, res, it
    raise EigenIterationError(f"inverse iteration stalled at residual {res:.3g} (eigenvalue {lam:.12g})")


def principal_eigenpair(domain: Domain, f: RunningCost, eps: float, h: float, tol: float = 1e-13,
                        max_iter: int = 5000, n_boundary: int = 256, boundary: str = "shortley-weller") -> LinearEigenpair:
    """Smallest eigenvalue of the discrete Dirichlet operator -eps^2 Lap_h + f by shifted inverse iteration."""
    g = dirichlet_grid(domain, h, boundary)
    fvals = f(g.points)
    A = _operator(g, fvals, eps)
    # below the spectrum: the factorization stays definite and iteration picks the lowest mode
    shift0 = float(np.min(fvals[g.interior]))
    try:
        x, lam, res, it = _inverse_iteration(A, shift0, tol, max_iter, g.dim == 1)
    except EigenIterationError:
        # retry close to a rough Arnoldi estimate
        est = float(np.real(spla.eigs(A, k=1, which="SR", tol=1e-6, return_eigenvectors=False)[0]))
        x, lam, res, it = _inverse_iteration(A, est - 1e-3 * max(1.0, abs(est)), tol, max_iter, g.dim == 1)
    w = np.zeros(len(g.points))
    w[g.interior] = x
    if w[g.interior].sum() < 0:
        w = -w
    w /= np.sqrt(g.cell * np.sum(w**2))
    pair = LinearEigenpair(lam, w, g, eps, f, res, it, bool(np.all(w[g.interior] > 0)))
    pts, nrm, dn = boundary_normal_derivative(pair, n_boundary)
    pair.boundary_points, pair.normals, pair.normal_derivative = pts, nrm, dn
    return pair


def _fit_gradient(g: DirichletGrid, w: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    """Gradient at boundary point b of the least-squares quadratic through the interior nodes
    within ``radius`` of b, constrained to vanish at b."""
    d = g.points[g.interior] - b
    near = np.hypot(d[:, 0], d[:, 1]) <= radius
    d, vals = d[near], w[g.interior][near]
    X = np.c_[d[:, 0], d[:, 1], d[:, 0] ** 2, d[:, 0] * d[:, 1], d[:, 1] ** 2]
    coef = np.linalg.lstsq(X, vals, rcond=None)[0]
    return coef[:2]


def boundary_normal_derivative(pair: LinearEigenpair, n_boundary: int = 256):
    """Outward normal derivative at boundary samples.

    1D: one-sided stencil (3 w(b) - 4 w(b -+ h) + w(b -+ 2h)) / (2h) with w(b) = 0.
    2D: gradient of a local quadratic fit vanishing at the sample, dotted with the normal."""
    g, w = pair.grid, pair.w
    if g.dim == 1:
        h = g.h
        right = (-4 * w[-2] + w[-3]) / (2 * h)
        left = (-4 * w[1] + w[2]) / (2 * h)
        pts = np.array([[g.points[0, 0]], [g.points[-1, 0]]])
        return pts, np.array([[-1.0], [1.0]]), np.array([left, right])
    pts = g.domain.boundary_samples(n_boundary)
    nrm = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    grads = np.array([_fit_gradient(g, w, b, 3.0 * g.h) for b in pts])
    return pts, nrm, np.sum(grads * nrm, axis=1)


def rayleigh_quotient(w: np.ndarray, f: RunningCost, eps: float, grid: DirichletGrid,
                      norm_tol: float = 1e-8) -> float:
    """Discrete integral of eps^2 |Dw|^2 + f w^2 for a unit-norm w with Dirichlet zeros.

    Sums over lattice edges, so it reproduces the eigenvalue exactly for symmetric
    discretizations (intervals, staircase disks)."""
    w = np.asarray(w, dtype=float)
    if np.any(w[~grid.interior] != 0):
        raise NormalizationError("trial function must vanish off the interior nodes")
    nrm = np.sqrt(grid.cell * np.sum(w**2))
    if abs(nrm - 1.0) > norm_tol:
        raise NormalizationError(f"trial function has L2 norm {nrm:.12g}, expected 1")
    a, b = grid.edges[:, 0], grid.edges[:, 1]
    grad2 = np.sum((w[b] - w[a]) ** 2) / grid.h**2
    return float(grid.cell * (eps**2 * grad2 + np.sum(f(grid.points) * w**2)))


def normalize(w: np.ndarray, grid: DirichletGrid) -> np.ndarray:
    w = np.where(grid.interior, w, 0.0)
    return w / np.sqrt(grid.cell * np.sum(w**2))


@dataclass
class HopfColeField:
    v: np.ndarray                 # -eps log w; +inf at boundary nodes
    boundary: np.ndarray          # flagged (blow-up) nodes
    defect: float                 # sup of the equation defect on the core region
    core: np.ndarray              # nodes where the defect is measured


def hopf_cole_transform(w: np.ndarray, eps: float, grid: DirichletGrid | None = None,
                        c: float | None = None, f: RunningCost | None = None, core: float = 0.7) -> HopfColeField:
    """v = -eps log w on interior nodes. With grid, c (the eigenvalue) and f, also report the
    defect of |Dv|^2 - f - eps Lap v + c on nodes within ``core`` times the half-width (1D)."""
    w = np.asarray(w, dtype=float)
    interior = grid.interior if grid is not None else np.ones(len(w), dtype=bool)
    if np.any(w[interior] <= 0):
        bad = int(np.flatnonzero(interior & (w <= 0))[0])
        raise TransformDomainError(f"w is not positive at node {bad}")
    v = np.full(len(w), np.inf)
    v[interior] = -eps * np.log(w[interior])
    defect, mask = float("nan"), np.zeros(len(w), dtype=bool)
    if grid is not None and c is not None and f is not None:
        if grid.dim != 1:
            raise ValueError("the defect readout is implemented on intervals")
        x, h = grid.points[:, 0], grid.h
        mask = np.abs(x) <= core * grid.domain.half_width + 1e-12
        mask[[0, -1]] = False
        i = np.flatnonzero(mask)
        Dv = (v[i + 1] - v[i - 1]) / (2 * h)
        Lv = (v[i + 1] - 2 * v[i] + v[i - 1]) / h**2
        defect = float(np.max(np.abs(Dv**2 - f(grid.points[i]) - eps * Lv + c)))
    return HopfColeField(v, ~interior, defect, mask)


def identity_field(x: np.ndarray) -> np.ndarray:
    return x


def shape_derivative(pair: LinearEigenpair, domain: Domain | None = None,
                     V: Callable[[np.ndarray], np.ndarray] | None = identity_field) -> float:
    """-eps^2 * boundary integral of |dw/dn|^2 (V.n). V = None means the zero field."""
    if V is None:
        return 0.0
    pts, nrm, dn = pair.boundary_points, pair.normals, pair.normal_derivative
    Vn = np.sum(np.asarray(V(pts), dtype=float).reshape(pts.shape) * nrm, axis=1)
    if pair.grid.dim == 1:
        return float(-pair.eps**2 * np.sum(dn**2 * Vn))
    domain = pair.grid.domain if domain is None else domain
    R = domain.half_width
    dS = 2 * np.pi * R / len(pts)
    return float(-pair.eps**2 * np.sum(dn**2 * Vn) * dS)


@dataclass
class P2Curve:
    lambdas: np.ndarray
    c: np.ndarray
    cprime_fd: float
    csecond_fd: float
    cprime_shape: float
    mismatch: float               # relative |FD - boundary integral|
    dilation_mismatch: float      # relative |FD + 2 c(0)|; meaningful for f = 0
    steps: np.ndarray
    first_differences: np.ndarray
    second_differences: np.ndarray


def eigencurve_p2(domain: Domain, f: RunningCost, eps: float, lambdas: Sequence[float] = (-0.1, -0.05, 0.0, 0.05, 0.1),
                  h: float = 1 / 128, boundary: str = "shortley-weller") -> P2Curve:
    """c(lambda) on (1+lambda) * domain with the node count held fixed, so the grid dilates with
    the domain; central differences at 0 refined by Richardson over halving steps."""
    lams = np.array(sorted(set(float(l) for l in lambdas)))
    if not np.any(lams == 0):
        raise ValueError("lambda samples must include 0")
    if np.any(1 + lams <= 0):
        raise ValueError("1 + lambda must stay positive")
    pairs = {}
    for l in lams:
        d = Domain(domain.kind, domain.params, domain.scale * (1 + l))
        pairs[l] = principal_eigenpair(d, f, eps, h * (1 + l), boundary=boundary)
    c = np.array([pairs[l].c for l in lams])
    steps = np.array(sorted({abs(l) for l in lams if l > 0 and -l in pairs}, reverse=True))
    if len(steps) == 0:
        raise ValueError("need symmetric lambda samples")
    c0 = pairs[0.0].c
    d1 = np.array([(pairs[s].c - pairs[-s].c) / (2 * s) for s in steps])
    d2 = np.array([(pairs[s].c - 2 * c0 + pairs[-s].c) / s**2 for s in steps])

    def refine(vals):
        if len(vals) < 2:
            return float(vals[-1])
        r = (steps[-2] / steps[-1]) ** 2
        return float((r * vals[-1] - vals[-2]) / (r - 1))

    cp, cpp = refine(d1), refine(d2)
    sd = shape_derivative(pairs[0.0], domain)
    return P2Curve(lams, c, cp, cpp, sd, abs(cp - sd) / max(abs(sd), 1e-300),
                   abs(cp + 2 * c0) / abs(2 * c0), steps, d1, d2)


def write_p2_curve_csv(path, curve: P2Curve) -> None:
    rows = [(l, c, curve.cprime_fd if l == 0 else float("nan")) for l, c in zip(curve.lambdas, curve.c)]
    write_csv(path, ["lambda", "c", "fd_derivative"], rows)


def write_boundary_table(path, pair: LinearEigenpair) -> None:
    pts, nrm, dn = pair.boundary_points, pair.normals, pair.normal_derivative
    xn = np.sum(pts * nrm, axis=1)
    header = ["x"] if pts.shape[1] == 1 else ["x", "y"]
    write_csv(path, header + ["dw_dn", "x_dot_n"], [tuple(p) + (d, s) for p, d, s in zip(pts, dn, xn)])
