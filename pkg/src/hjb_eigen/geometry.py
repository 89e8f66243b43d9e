"""Star-shaped domains, their dilations, the boundary-separation check and lattice grids."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class InvalidDomainError(ValueError):
    pass


class InvalidScaleError(ValueError):
    pass


class ConditionAViolated(ValueError):
    pass


class DegenerateGridError(ValueError):
    pass


KINDS = ("interval", "disk", "radial")


@dataclass(frozen=True)
class Domain:
    """A region star-shaped about the origin, stored as a base shape times a scale.

    ``params`` holds ``a`` (interval half-width), ``R`` (disk radius) or
    ``theta``/``rho`` (radial profile sampled on an angle grid in [0, 2pi)).
    """

    kind: str
    params: dict
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDomainError(f"unknown domain kind {self.kind!r}")
        if not self.scale > 0:
            raise InvalidScaleError(f"scale must be positive, got {self.scale}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def half_width(self) -> float:
        """Interval half-width or disk radius after scaling."""
        if self.kind == "interval":
            return self.scale * self.params["a"]
        if self.kind == "disk":
            return self.scale * self.params["R"]
        raise InvalidDomainError("half_width is defined for intervals and disks only")

    @property
    def origin_interior(self) -> bool:
        # every accepted construction has strictly positive extent around 0
        return True

    def radius(self, theta) -> np.ndarray:
        """Distance from the origin to the boundary along direction theta (2D kinds)."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            return np.full_like(theta, self.scale * self.params["R"])
        if self.kind == "radial":
            th = np.asarray(self.params["theta"])
            rho = np.asarray(self.params["rho"])
            t = np.mod(theta, 2 * np.pi)
            return self.scale * np.interp(t, np.r_[th, 2 * np.pi], np.r_[rho, rho[0]])
        raise InvalidDomainError("radius() is defined for 2D domains")

    def contains(self, pts, closed: bool = True, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "interval":
            a = self.half_width
            d = np.abs(pts[:, 0]) - a
        else:
            r = np.hypot(pts[:, 0], pts[:, 1])
            d = r - self.radius(np.arctan2(pts[:, 1], pts[:, 0]))
        scale = max(1.0, self.diameter)
        return d <= tol * scale if closed else d < -tol * scale

    @property
    def diameter(self) -> float:
        if self.kind == "interval":
            return 2 * self.half_width
        if self.kind == "disk":
            return 2 * self.half_width
        return 2 * self.scale * float(np.max(self.params["rho"]))

    def boundary_samples(self, n: int = 256) -> np.ndarray:
        """Points on the boundary, shape (m, dim)."""
        if self.kind == "interval":
            a = self.half_width
            return np.array([[-a], [a]])
        theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
        r = self.radius(theta)
        return np.c_[r * np.cos(theta), r * np.sin(theta)]

    def to_config(self) -> dict:
        params = {k: (list(map(float, v)) if np.ndim(v) else float(v)) for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, "scale": float(self.scale)}


def make_domain(kind: str, **params) -> Domain:
    """Build a base domain (scale 1). ``interval`` takes ``a``, ``disk`` takes ``R``,
    ``radial`` takes ``rho`` (samples) and optionally ``theta`` (equispaced by default)."""
    if kind == "interval":
        a = float(params.get("a", 1.0))
        if not a > 0:
            raise InvalidDomainError(f"interval half-width must be positive, got {a}")
        return Domain("interval", {"a": a})
    if kind == "disk":
        R = float(params.get("R", 1.0))
        if not R > 0:
            raise InvalidDomainError(f"disk radius must be positive, got {R}")
        return Domain("disk", {"R": R})
    if kind == "radial":
        if "rho" not in params:
            raise InvalidDomainError("radial domain needs a 'rho' profile")
        rho = np.asarray(params["rho"], dtype=float)
        if rho.ndim != 1 or rho.size < 3:
            raise InvalidDomainError("radial profile needs at least 3 samples")
        if not np.all(rho > 0):
            k = int(np.argmin(rho))
            raise InvalidDomainError(f"radial profile must be positive; sample {k} is {rho[k]}")
        theta = np.asarray(params.get("theta", np.linspace(0, 2 * np.pi, rho.size, endpoint=False)), dtype=float)
        if theta.shape != rho.shape:
            raise InvalidDomainError("theta and rho must have the same length")
        return Domain("radial", {"theta": theta, "rho": rho})
    raise InvalidDomainError(f"unknown domain kind {kind!r}")


def radial_domain(profile: Callable[[np.ndarray], np.ndarray], n: int = 256) -> Domain:
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return make_domain("radial", theta=theta, rho=profile(theta))


def domain_from_config(block: dict) -> Domain:
    d = make_domain(block["kind"], **block.get("params", {}))
    s = float(block.get("scale", 1.0))
    return d if s == 1.0 else scale_domain(d, s - 1.0)


def scale_domain(d: Domain, r: float) -> Domain:
    """Return (1+r)*d. Scalings compose multiplicatively."""
    s = 1.0 + r
    if not s > 0:
        raise InvalidScaleError(f"1 + r must be positive, got {s}")
    return Domain(d.kind, d.params, d.scale * s)


@dataclass(frozen=True)
class ScalingSchedule:
    """Dilation rule r(lambda) with limit slope gamma and the sampled lambda values."""

    gamma: float = 1.0
    samples: tuple = (-0.32, -0.16, -0.08, -0.04, -0.02, 0.0, 0.02, 0.04, 0.08, 0.16, 0.32)
    rule: Callable[[float], float] | None = None

    def r(self, lam: float) -> float:
        return self.gamma * lam if self.rule is None else float(self.rule(lam))

    def check(self, tol: float = 1e-6) -> None:
        pos = sorted(l for l in self.samples if l > 0)
        if self.rule is not None and abs(self.r(0.0)) > tol:
            raise InvalidScaleError("r(0) must vanish")
        if pos:
            lam = pos[0]
            slope = self.r(lam) / lam
            if not np.isfinite(slope):
                raise InvalidScaleError("r(lambda)/lambda is not finite")
            if self.rule is not None and len(pos) > 1:
                lam2 = pos[1]
                if abs(self.r(lam) / lam - self.gamma) > abs(self.r(lam2) / lam2 - self.gamma) + tol:
                    raise InvalidScaleError("r(lambda)/lambda does not approach gamma on the samples")
        for lam in self.samples:
            if not 1.0 + self.r(lam) > 0:
                raise InvalidScaleError(f"1 + r({lam}) is not positive")


@dataclass
class ConditionAReport:
    kappa_distance: float
    kappa_ball: float
    worst_r: float
    worst_point: np.ndarray

    @property
    def kappa(self) -> float:
        return min(self.kappa_distance, self.kappa_ball)


def _dist_to_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        ap = p - a
        t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        out[k] = np.sqrt(np.min(np.sum((p - proj) ** 2, axis=1)))
    return out


def check_condition_A(d: Domain, r_probe: Sequence[float] = (1e-3, 1e-2, 1e-1),
                      n_boundary: int = 256, n_polygon: int = 4096) -> ConditionAReport:
    """Largest kappa with dist((1+r)x, closure(d)) >= kappa*r on probed boundary points and r,
    together with the inscribed-ball radius. Both are reported; ``.kappa`` is the minimum.
    The ball B(0, kappa) is compactly contained only for kappa strictly below ``kappa_ball``."""
    r_probe = [float(r) for r in r_probe if r > 0]
    if not r_probe:
        raise ValueError("need at least one positive probe r")
    if d.kind == "interval":
        a = d.half_width
        best, worst_r, worst_x = np.inf, None, None
        for r in r_probe:
            for x in (-a, a):
                y = (1 + r) * x
                dist = abs(y) - a
                if dist / r < best:
                    best, worst_r, worst_x = dist / r, r, np.array([x])
        return ConditionAReport(best, a, worst_r, worst_x)

    theta = np.linspace(0, 2 * np.pi, n_polygon, endpoint=False)
    rr = d.radius(theta)
    poly = np.c_[rr * np.cos(theta), rr * np.sin(theta)]
    kappa_ball = float(np.min(_dist_to_polygon(np.zeros((1, 2)), poly)))
    if not kappa_ball > 0:
        raise ConditionAViolated("origin is not interior")
    xb = d.boundary_samples(n_boundary)
    best, worst_r, worst_x = np.inf, None, None
    for r in r_probe:
        y = (1 + r) * xb
        inside = d.contains(y, closed=True, tol=0.0)
        dist = _dist_to_polygon(y, poly)
        dist[inside] = 0.0
        k = int(np.argmin(dist))
        if dist[k] / r < best:
            best, worst_r, worst_x = dist[k] / r, r, xb[k]
    if not best > 0:
        raise ConditionAViolated(f"dilated boundary point {worst_x} is not separated from the domain")
    return ConditionAReport(float(best), kappa_ball, worst_r, worst_x)


@dataclass
class Grid:
    """Uniform lattice (spacing h per axis) covering the closure of a domain.

    ``nbr[k]`` has shape (n_nodes, 2): the index of the node at -h e_k and +h e_k, or -1.
    """

    points: np.ndarray
    h: float
    boundary: np.ndarray
    nbr: np.ndarray
    lattice: np.ndarray
    domain: Domain | None = None
    origin_index: int = 0
    index: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def x(self) -> np.ndarray:
        """Coordinates for 1D grids."""
        return self.points[:, 0]

    def node_of(self, lattice_coords) -> int:
        return self.index.get(tuple(int(c) for c in lattice_coords), -1)


def _grid_from_lattice(lat: np.ndarray, h: float, d: Domain | None) -> Grid:
    order = np.lexsort(lat.T[::-1])
    lat = lat[order]
    index = {tuple(row): i for i, row in enumerate(lat.tolist())}
    dim = lat.shape[1]
    nbr = np.full((dim, len(lat), 2), -1, dtype=np.int64)
    for k in range(dim):
        e = np.zeros(dim, dtype=np.int64)
        e[k] = 1
        for side, sgn in ((0, -1), (1, 1)):
            nbr[k, :, side] = [index.get(tuple(row), -1) for row in (lat + sgn * e).tolist()]
    boundary = np.any(nbr < 0, axis=(0, 2))
    origin = index.get(tuple([0] * dim), -1)
    if origin < 0:
        raise DegenerateGridError("origin is not a grid node")
    return Grid(points=lat * h, h=h, boundary=boundary, nbr=nbr, lattice=lat, domain=d,
                origin_index=origin, index=index)


def _prune_spikes(lat: np.ndarray) -> np.ndarray:
    """Drop nodes missing both neighbours along some axis (e.g. the axis tips of a disk).
    No control keeps the chain on the grid there."""
    while True:
        present = {tuple(row) for row in lat.tolist()}
        bad = np.zeros(len(lat), dtype=bool)
        for k in range(lat.shape[1]):
            e = np.zeros(lat.shape[1], dtype=np.int64)
            e[k] = 1
            lo = np.array([tuple(r) in present for r in (lat - e).tolist()])
            hi = np.array([tuple(r) in present for r in (lat + e).tolist()])
            bad |= ~lo & ~hi
        if not bad.any():
            return lat
        lat = lat[~bad]


def build_grid(d: Domain, h: float, lattice_tol: float = 1e-9) -> Grid:
    """Lattice h*Z^n intersected with the closed domain; the origin is always a node.
    In 2D, nodes with no lattice neighbour on either side of an axis are pruned.

    Interval grids must contain both endpoints exactly, so a/h has to be an integer."""
    if not h > 0:
        raise DegenerateGridError("h must be positive")
    if not h < d.diameter / 2:
        raise DegenerateGridError(f"h={h} is not smaller than half the diameter {d.diameter}")
    if d.kind == "interval":
        a = d.half_width
        m = a / h
        M = int(round(m))
        if abs(m - M) > lattice_tol * max(1.0, m):
            raise DegenerateGridError(f"half-width {a} is not a multiple of h={h}")
        if M < 1:
            raise DegenerateGridError("grid needs at least three nodes")
        lat = np.arange(-M, M + 1)[:, None]
        return _grid_from_lattice(lat, h, d)
    R = d.diameter / 2
    M = int(np.floor(R / h + 1e-9))
    ax = np.arange(-M, M + 1)
    I, J = np.meshgrid(ax, ax, indexing="ij")
    lat = np.c_[I.ravel(), J.ravel()]
    keep = d.contains(lat * h, closed=True, tol=1e-12)
    lat = _prune_spikes(lat[keep])
    g = _grid_from_lattice(lat, h, d)
    if g.n < 5 or not np.any(g.interior):
        raise DegenerateGridError("grid has no interior nodes")
    return g


def dilated_grid(base: Grid, s: float) -> Grid:
    """Same lattice as ``base`` with spacing s*h: the grid of the dilated domain s*base.domain
    whose nodes are the images of the base nodes under x -> s*x."""
    if not s > 0:
        raise InvalidScaleError("dilation factor must be positive")
    d = None if base.domain is None else scale_domain(base.domain, s - 1.0)
    return Grid(points=base.lattice * (base.h * s), h=base.h * s, boundary=base.boundary.copy(),
                nbr=base.nbr, lattice=base.lattice, domain=d, origin_index=base.origin_index,
                index=base.index)


def lattice_compatible(d: Domain, h: float, r: float, tol: float = 1e-9) -> bool:
    """True when (1+r)*d has a grid with the same spacing h whose endpoints are exact."""
    if d.kind != "interval":
        return True
    m = (1 + r) * d.half_width / h
    return abs(m - round(m)) <= tol * max(1.0, m)


def node_map(small: Grid, large: Grid, rescale: float = 1.0) -> np.ndarray:
    """Index in ``large`` of each node of ``small`` after x -> rescale*x; -1 when off-lattice."""
    y = small.points * rescale / large.h
    yi = np.rint(y).astype(np.int64)
    ok = np.all(np.abs(y - yi) <= 1e-9 * np.maximum(1.0, np.abs(y)), axis=1)
    out = np.array([large.index.get(tuple(row), -1) for row in yi.tolist()], dtype=np.int64)
    out[~ok] = -1
    return out
