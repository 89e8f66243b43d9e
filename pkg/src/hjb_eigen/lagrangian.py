"""Hamiltonian |xi|^p - f(x), its Legendre dual C|v|^q + f(x), and the dilation pairing."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import InvalidScaleError


class CoefficientMismatch(ValueError):
    pass


# ---------------------------------------------------------------- running costs

@dataclass(frozen=True)
class RunningCost:
    """Closed-form running cost f with exact gradient.

    kinds and params:
      constant  K
      affine    slope (scalar or per-axis), offset
      bump      amplitude A, width sigma:   A exp(-|x|^2 / sigma^2)
      cosine    amplitude A, frequency w:   A sum_k cos(w x_k)
    Any kind accepts an additive ``shift``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CATALOG:
            raise ValueError(f"unknown running cost {self.kind!r}; choose from {sorted(CATALOG)}")

    def param(self, key):
        return self.params.get(key, CATALOG[self.kind][key])

    def __call__(self, x) -> np.ndarray:
        return self._value(_pts(x)) + float(self.params.get("shift", 0.0))

    def _value(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(len(x), float(self.param("K")))
        if self.kind == "affine":
            slope = np.broadcast_to(np.asarray(self.param("slope"), dtype=float), (x.shape[1],))
            return x @ slope + float(self.param("offset"))
        if self.kind == "bump":
            A, s = float(self.param("A")), float(self.param("sigma"))
            return A * np.exp(-np.sum(x**2, axis=1) / s**2)
        A, w = float(self.param("A")), float(self.param("w"))
        return A * np.sum(np.cos(w * x), axis=1)

    def grad(self, x) -> np.ndarray:
        x = _pts(x)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "affine":
            slope = np.broadcast_to(np.asarray(self.param("slope"), dtype=float), (x.shape[1],))
            return np.tile(slope, (len(x), 1))
        if self.kind == "bump":
            A, s = float(self.param("A")), float(self.param("sigma"))
            return (-2.0 / s**2) * (A * np.exp(-np.sum(x**2, axis=1) / s**2))[:, None] * x
        A, w = float(self.param("A")), float(self.param("w"))
        return -A * w * np.sin(w * x)

    def shifted(self, K: float) -> "RunningCost":
        """f + K."""
        return RunningCost(self.kind, dict(self.params, shift=float(self.params.get("shift", 0.0)) + K))

    def to_config(self) -> dict:
        return {"name": self.kind, "params": {k: _plain(v) for k, v in self.params.items()}}


CATALOG = {
    "constant": {"K": 0.0},
    "affine": {"slope": 1.0, "offset": 0.0},
    "bump": {"A": 1.0, "sigma": 0.5},
    "cosine": {"A": 1.0, "w": np.pi},
}


def running_cost(name: str, **params) -> RunningCost:
    if name in ("zero", "0"):
        return RunningCost("constant", {"K": 0.0})
    return RunningCost(name, params)


def _pts(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x[:, None]
    return x


def _plain(v):
    return list(map(float, v)) if np.ndim(v) else float(v)


def _norm(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.abs(v) if v.ndim <= 1 else np.linalg.norm(v, axis=-1)


# ---------------------------------------------------------------- Legendre coefficient

def candidate_coefficients(p: float) -> dict:
    """Two closed forms that circulate for the conjugate coefficient of |xi|^p."""
    q = p / (p - 1.0)
    return {"conjugate": (p - 1.0) * p ** (-q), "alternate": p ** (-1.0 / q) * (p - 1.0)}


def legendre_residual(p: float, C: float, xi, v_grid) -> np.ndarray:
    """|max_v (xi v - C|v|^q) - |xi|^p| per xi, with the max over a finite velocity grid."""
    q = p / (p - 1.0)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    v = np.asarray(v_grid, dtype=float)
    best = np.max(xi[:, None] * v[None, :] - C * np.abs(v[None, :]) ** q, axis=1)
    return np.abs(best - np.abs(xi) ** p)


def legendre_tolerance(p: float, C: float, v_grid) -> float:
    """A-priori bound on the loss from restricting the sup to the grid (for C|v|^q with q<=2)."""
    q = p / (p - 1.0)
    dv = float(np.max(np.diff(np.sort(np.asarray(v_grid, dtype=float)))))
    return 2.0 * C * dv**q + 1e-12


@lru_cache(maxsize=64)
def select_legendre_coefficient(p: float, n: int = 20001) -> float:
    """Pick whichever candidate coefficient reproduces |xi|^p under a brute-force sup."""
    xi = np.linspace(-2.0, 2.0, 41)
    vmax = 1.5 * p * 2.0 ** (p - 1) + 1.0
    v = np.linspace(-vmax, vmax, n)
    passing = []
    for name, C in candidate_coefficients(p).items():
        res = legendre_residual(p, C, xi, v).max()
        if res <= legendre_tolerance(p, C, v):
            passing.append(C)
    if not passing:
        raise CoefficientMismatch(f"no candidate coefficient reproduces |xi|^{p}")
    return passing[0]


# ---------------------------------------------------------------- spec

@dataclass(frozen=True)
class LagrangianSpec:
    p: float
    epsilon: float
    f: RunningCost = field(default_factory=lambda: RunningCost("constant", {"K": 0.0}))
    C_p: float = field(init=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "C_p", select_legendre_coefficient(self.p))

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def alpha(self) -> float:
        """Hoelder exponent (p-2)/(p-1) of state-constraint solutions."""
        return (self.p - 2.0) / (self.p - 1.0)

    def with_f(self, f: RunningCost) -> "LagrangianSpec":
        return LagrangianSpec(self.p, self.epsilon, f)

    def to_config(self) -> dict:
        return {"p": float(self.p), "epsilon": float(self.epsilon), "f": self.f.to_config()}


def hamiltonian_value(spec: LagrangianSpec, x, xi) -> np.ndarray:
    return _norm(xi) ** spec.p - spec.f(x)


def lagrangian_value(spec: LagrangianSpec, x, v) -> np.ndarray:
    return spec.C_p * _norm(v) ** spec.q + spec.f(x)


def legendre_check(spec: LagrangianSpec, xi_samples, v_samples, C: float | None = None) -> float:
    """Max residual of the grid sup against |xi|^p; raises naming the worst xi if above tolerance."""
    C = spec.C_p if C is None else C
    xi = np.atleast_1d(np.asarray(xi_samples, dtype=float))
    if xi.size == 0 or np.size(v_samples) == 0:
        raise ValueError("sample lists must be nonempty")
    res = legendre_residual(spec.p, C, xi, v_samples)
    tol = legendre_tolerance(spec.p, C, v_samples) if np.size(v_samples) > 1 else 0.0
    k = int(np.argmax(res))
    if res[k] > tol:
        raise CoefficientMismatch(f"Legendre residual {res[k]:.3e} > {tol:.3e} at xi={xi[k]}")
    return float(res[k])


def radial_gradient_pairing(spec: LagrangianSpec, x, v) -> np.ndarray:
    """(-x, v) . grad L(x, v) = -x . Df(x) + q C_p |v|^q."""
    x = _pts(x)
    xdf = np.sum(x * spec.f.grad(x), axis=1)
    return -xdf + spec.q * spec.C_p * _norm(v) ** spec.q


def scaled_lagrangian(spec: LagrangianSpec, r: float, x, v) -> np.ndarray:
    """L((1+r)x, v/(1+r))."""
    s = 1.0 + r
    if not s > 0:
        raise InvalidScaleError(f"1 + r must be positive, got {s}")
    return spec.C_p * (_norm(v) / s) ** spec.q + spec.f(s * _pts(x))


def velocity_bound(spec: LagrangianSpec, h: float, fmax: float) -> float:
    """Default truncation p G^(p-1) with G the gradient scale next to the boundary
    (boundary-layer profile at distance h/2) plus the bulk scale from |f|."""
    p = spec.p
    G_layer = (2.0 * spec.epsilon / ((p - 1.0) * h)) ** (1.0 / (p - 1.0))
    G_bulk = (2.0 * fmax + 1.0) ** (1.0 / p)
    return 2.0 * p * (G_layer + G_bulk) ** (p - 1.0)
