"""Config-driven experiment runner and report writer.

Configs are JSON objects with the blocks ``domain``, ``lagrangian``, ``grid``, ``schedule``,
``pipeline``, ``output`` and ``formats``; every block is optional and falls back to the
defaults in ``ExperimentConfig``. The output directory can be overridden with HJB_EIGEN_OUT.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import Domain, ScalingSchedule, domain_from_config
from .io_utils import write_csv, write_json, write_plot_data
from .lagrangian import CATALOG, LagrangianSpec, RunningCost

log = logging.getLogger("hjb_eigen")

PIPELINES = ("discounted", "eigencurve", "derivatives", "discount-limit", "hopf-cole", "full-suite")
FORMATS = ("csv", "json", "plot-data")
SUBCOMMANDS = {"solve": "discounted", "eigencurve": "eigencurve", "derivatives": "derivatives",
               "discount-limit": "discount-limit", "hopf-cole": "hopf-cole", "suite": "full-suite"}
OUT_ENV = "HJB_EIGEN_OUT"


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _default_domain():
    return {"kind": "interval", "params": {"a": 1.0}}


def _default_lagrangian():
    return {"p": 3.0, "epsilon": 0.1, "f": {"kind": "zero", "params": {}}}


def _default_grid():
    return {"h": 1 / 200, "levels": [1 / 100, 1 / 200, 1 / 400]}


def _default_schedule():
    return {"gamma": 1.0,
            "lambdas": [-0.32, -0.16, -0.08, -0.04, -0.02, 0.0, 0.02, 0.04, 0.08, 0.16, 0.32],
            "deltas": [0.16, 0.08, 0.04, 0.02, 0.01, 0.005],
            "gammas": [-0.5, -0.25, 0.0, 0.25, 0.5]}


@dataclass
class ExperimentConfig:
    domain: dict = field(default_factory=_default_domain)
    lagrangian: dict = field(default_factory=_default_lagrangian)
    grid: dict = field(default_factory=_default_grid)
    schedule: dict = field(default_factory=_default_schedule)
    pipeline: str = "full-suite"
    output: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("$", "config must be an object")
        known = {f for f in cls.__dataclass_fields__}
        for k in raw:
            if k not in known:
                raise ConfigError(f"$.{k}", "unknown field")
        cfg = cls()
        for blk in ("domain", "lagrangian", "grid", "schedule"):
            if blk in raw:
                if not isinstance(raw[blk], dict):
                    raise ConfigError(f"$.{blk}", "must be an object")
                merged = dict(getattr(cfg, blk))
                merged.update(raw[blk])
                setattr(cfg, blk, merged)
        for k in ("pipeline", "output", "formats"):
            if k in raw:
                setattr(cfg, k, raw[k])
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def digest(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k != "output"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    # ------------------------------------------------------------ validation

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigError("$.pipeline", f"unknown pipeline {self.pipeline!r}; choose from {list(PIPELINES)}")
        if not isinstance(self.formats, list) or not self.formats:
            raise ConfigError("$.formats", "must be a non-empty list")
        for i, fm in enumerate(self.formats):
            if fm not in FORMATS:
                raise ConfigError(f"$.formats[{i}]", f"unknown format {fm!r}")
        if not isinstance(self.output, str) or not self.output:
            raise ConfigError("$.output", "must be a non-empty path")
        try:
            self.domain_obj()
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("$.domain", str(exc)) from exc
        lg = self.lagrangian
        for key in ("p", "epsilon"):
            if not _is_number(lg.get(key)):
                raise ConfigError(f"$.lagrangian.{key}", "must be a number")
        if lg["epsilon"] <= 0:
            raise ConfigError("$.lagrangian.epsilon", "must be positive")
        f = lg.get("f")
        kind = f if isinstance(f, str) else (f or {}).get("kind")
        if kind not in set(CATALOG) | {"zero"}:
            raise ConfigError("$.lagrangian.f.kind", f"unknown running cost {kind!r}; choose from {sorted(CATALOG) + ['zero']}")
        if isinstance(f, dict):
            for k, v in f.get("params", {}).items():
                if not _is_number(v):
                    raise ConfigError(f"$.lagrangian.f.params.{k}", "must be a number")
        p = lg["p"]
        # regime guard: the chain pipelines need p > 2, the linear eigenproblem is p = 2
        if self.pipeline == "hopf-cole":
            if p != 2:
                raise ConfigError("$.lagrangian.p", "hopf-cole pipeline requires p = 2")
        elif p <= 2:
            raise ConfigError("$.lagrangian.p", f"pipeline {self.pipeline!r} requires p > 2")
        h = self.grid.get("h")
        if not _is_number(h) or not 0 < h < 0.5 * self.domain_obj().diameter:
            raise ConfigError("$.grid.h", "must be a positive number below half the domain diameter")
        for i, v in enumerate(self.grid.get("levels", [])):
            if not _is_number(v) or v <= 0:
                raise ConfigError(f"$.grid.levels[{i}]", "must be a positive number")
        sch = self.schedule
        if not _is_number(sch.get("gamma")):
            raise ConfigError("$.schedule.gamma", "must be a number")
        for key in ("lambdas", "deltas", "gammas"):
            seq = sch.get(key, [])
            if not isinstance(seq, list):
                raise ConfigError(f"$.schedule.{key}", "must be a list")
            for i, v in enumerate(seq):
                if not _is_number(v):
                    raise ConfigError(f"$.schedule.{key}[{i}]", "must be a number")
        if 0.0 not in [float(v) for v in sch.get("lambdas", [])]:
            raise ConfigError("$.schedule.lambdas", "must contain 0")
        for i, v in enumerate(sch.get("deltas", [])):
            if v <= 0:
                raise ConfigError(f"$.schedule.deltas[{i}]", "must be positive")
        d = sch.get("deltas", [])
        if any(b >= a for a, b in zip(d, d[1:])):
            raise ConfigError("$.schedule.deltas", "must decrease")
        if 0.0 not in [float(v) for v in sch.get("gammas", [])]:
            raise ConfigError("$.schedule.gammas", "must contain 0")

    # ------------------------------------------------------------ typed views

    def domain_obj(self) -> Domain:
        return domain_from_config(self.domain)

    def running_cost(self) -> RunningCost:
        f = self.lagrangian["f"]
        if isinstance(f, str):
            f = {"kind": f, "params": {}}
        kind, params = f["kind"], dict(f.get("params", {}))
        if kind == "zero":
            kind, params = "constant", {"K": 0.0, **params}
        return RunningCost(kind, params)

    def spec(self) -> LagrangianSpec:
        return LagrangianSpec(float(self.lagrangian["p"]), float(self.lagrangian["epsilon"]), self.running_cost())

    def scaling(self) -> ScalingSchedule:
        return ScalingSchedule(gamma=float(self.schedule["gamma"]), samples=tuple(float(v) for v in self.schedule["lambdas"]))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


# ------------------------------------------------------------------ report

@dataclass
class Check:
    name: str
    property: str          # the statement being tested
    measured: float
    tolerance: float
    passed: bool


@dataclass
class Table:
    header: list
    rows: list
    plot: tuple | None = None      # (x column, y column) for plot-data output


@dataclass
class RunReport:
    config: ExperimentConfig
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures and all(c.passed for c in self.checks)

    def check(self, name: str, prop: str, measured: float, tolerance: float, ok: bool | None = None) -> None:
        measured = float(measured)
        if ok is None:
            ok = measured <= tolerance
        self.checks.append(Check(name, prop, measured, float(tolerance), bool(ok)))

    def summary(self) -> dict:
        # wall time stays out of the files so repeated runs are byte-identical
        return {"pipeline": self.config.pipeline, "passed": self.passed,
                "checks": [asdict(c) for c in self.checks], "failures": self.failures,
                "tables": sorted(self.tables), "provenance": self.provenance,
                "config": {k: v for k, v in self.config.to_dict().items() if k != "output"}}


def emit_report(report: RunReport, formats=None, out=None) -> list[Path]:
    formats = report.config.formats if formats is None else formats
    out = Path(out if out is not None else report.config.output)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(report.tables):
        t = report.tables[name]
        if "csv" in formats:
            write_csv(out / f"{name}.csv", t.header, t.rows)
            written.append(out / f"{name}.csv")
        if "plot-data" in formats and t.plot is not None:
            i, j = (t.header.index(c) for c in t.plot)
            write_plot_data(out / f"{name}.dat", f"{t.plot[0]} {t.plot[1]}",
                            [r[i] for r in t.rows], [r[j] for r in t.rows])
            written.append(out / f"{name}.dat")
    if "json" in formats:
        write_json(out / "summary.json", report.summary())
        written.append(out / "summary.json")
    return written


# ------------------------------------------------------------------ pipelines

def _run_discounted(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .ergodic_lp import ergodic_lp_solve
    from .geometry import build_grid
    from .hjb_solver import assemble_mdp, discount_eigen_estimate, solve_discounted

    spec, dom, h = cfg.spec(), cfg.domain_obj(), float(cfg.grid["h"])
    deltas = [float(d) for d in cfg.schedule["deltas"]]
    grid = build_grid(dom, h)
    mdp = assemble_mdp(grid, spec)
    rows = []
    for d in deltas:
        vf = solve_discounted(mdp, d)
        rows.append((d, vf.at_origin, -d * vf.at_origin, vf.residual, vf.iterations))
    rep.tables["discounted"] = Table(["delta", "u_origin", "minus_delta_u_origin", "residual", "iterations"],
                                     rows, ("delta", "minus_delta_u_origin"))
    est = discount_eigen_estimate(spec, dom, deltas, h)
    c_h = ergodic_lp_solve(mdp).c_h
    rep.tables["discount_estimate"] = Table(["estimate", "band", "c_h"], [(est.c, est.band, c_h)])
    rep.check("discount_estimate", "-delta u_delta(0) extrapolates to the ergodic constant",
              abs(est.c - c_h), max(10 * est.band, 1e-6))
    rep.provenance.setdefault("grid_sizes", {})["discounted"] = grid.n


def _run_derivatives(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .ergodic_lp import ergodic_lp_solve, onesided_derivatives, stationarity_residual, write_measure_csv
    from .geometry import build_grid
    from .hjb_solver import assemble_mdp

    spec, dom, h = cfg.spec(), cfg.domain_obj(), float(cfg.grid["h"])
    mdp = assemble_mdp(build_grid(dom, h), spec)
    res = ergodic_lp_solve(mdp)
    d = onesided_derivatives(res)
    rep.tables["eigenvalue"] = Table(["c_h", "c_primal", "c_dual", "duality_gap", "stationarity", "cprime_minus", "cprime_plus"],
                                     [(res.c_h, res.c_primal, res.c_dual, res.duality_gap, res.stationarity, d.c_minus, d.c_plus)])
    mu = res.measure
    rep.tables["mather_measure"] = Table(["node", "x", "v", "mass"],
                                         [(int(n), float(p[0]), float(np.ravel(v)[0]), m)
                                          for n, p, v, m in zip(mu.nodes, mu.points, mu.velocities, mu.mass)])
    rep.check("duality_gap", "primal and dual ergodic programs agree", abs(res.duality_gap), 1e-8)
    rep.check("stationarity", "optimal measure is invariant for the chain", stationarity_residual(mdp, mu), 1e-8)
    rep.check("measure_normalized", "optimal measure is a probability", abs(mu.total - 1), 1e-10,
              ok=bool(abs(mu.total - 1) <= 1e-10 and np.all(mu.mass >= 0)))
    rep.check("derivative_order", "c'_- <= c'_+", d.c_minus - d.c_plus, 1e-9)
    if spec.f.kind == "constant":
        err = max(abs(d.c_plus + spec.q * res.c_h), abs(d.c_minus + spec.q * res.c_h))
        rep.check("derivative_identity", "c' = -q c for constant running cost", err, 1e-8)
    rep.provenance.setdefault("grid_sizes", {})["derivatives"] = mdp.n


def _run_eigencurve(cfg: ExperimentConfig, rep: RunReport, derivatives: bool = True) -> None:
    from .ergodic_lp import eigencurve

    spec, dom, h = cfg.spec(), cfg.domain_obj(), float(cfg.grid["h"])
    sch = cfg.scaling()
    cur = eigencurve(spec, dom, sch, h, grid_mode="dilated", derivatives=derivatives)
    rep.tables["eigencurve"] = Table(["lambda", "r", "c", "dc_forward", "cprime_minus", "cprime_plus"],
                                     list(zip(cur.lambdas, cur.r, cur.c, cur.dc_forward, cur.cprime_minus, cur.cprime_plus)),
                                     ("lambda", "c"))
    for lam, msg in cur.failures.items():
        rep.failures[f"eigencurve[{lam}]"] = msg
    ok = np.isfinite(cur.c)
    rep.check("monotone", "c(lambda) is nondecreasing in the dilation",
              float(np.max(np.r_[0.0, -np.diff(cur.c[ok])])), 1e-10)
    if spec.f.kind == "constant" and np.any(cur.lambdas == 0):
        c0 = cur.c[cur.lambdas == 0][0]
        K = float(spec.f(np.zeros((1, dom.dim)))[0])
        pred = K + (c0 - K) * (1 + cur.r) ** (-spec.q)
        rep.check("scaling_law", "c((1+r) domain) - K = (1+r)^(-q) (c(domain) - K) for constant f",
                  float(np.nanmax(np.abs(cur.c - pred) / np.abs(pred))), 0.01)
    if derivatives:
        inside = (cur.cprime_minus <= cur.cprime_plus + 1e-9)
        rep.check("derivative_order_curve", "c'_- <= c'_+ along the curve",
                  float(np.sum(~inside[ok])), 0.0)
    rep.provenance.setdefault("grid_sizes", {})["eigencurve"] = len(cur.lambdas)


def _run_discount_limit(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .discount_limit import back_forth_check, base_problem, c_of_gamma, measure_identity_check

    spec, dom, h = cfg.spec(), cfg.domain_obj(), float(cfg.grid["h"])
    lams = [float(v) for v in cfg.schedule["deltas"]]
    gammas = [float(v) for v in cfg.schedule["gammas"]]
    base = base_problem(spec, h, dom)
    curve = c_of_gamma(spec, gammas, lams, h, base)
    rep.tables["c_gamma"] = Table(["gamma", "C", "defect"], list(zip(curve.gammas, curve.C, curve.defects)), ("gamma", "C"))
    zero = curve.limits[0.0]
    rep.tables["vanishing_discount"] = Table(["lambda", "sup_successive_difference"],
                                             list(zip(zero.lambdas[1:], zero.cauchy)), ("lambda", "sup_successive_difference"))
    rep.check("vanishing_discount_cauchy", "successive normalized discounted fields contract",
              float(np.max(np.r_[0.0, np.diff(zero.cauchy)])), 0.0)
    rep.check("ergodic_limit", "the extrapolated limit solves the ergodic problem", zero.residual, 1e-6)
    rep.check("C_decreasing", "C(gamma) decreasing", float(np.max(np.diff(curve.C))), 10 * curve.tol)
    worst = min([d for _, d, _ in curve.concavity_table()] + [0.0])
    rep.check("C_concave", "C(gamma) midpoint concave", -worst, 10 * curve.tol)
    bf = back_forth_check(spec, h, gammas, lams, base, curve=curve)
    rep.tables["back_forth"] = Table(["cprime_minus", "cprime_plus", "neg_Cprime_minus", "neg_Cprime_plus"],
                                     [(bf.cprime_minus, bf.cprime_plus, bf.neg_Cprime_minus, bf.neg_Cprime_plus)])
    rep.check("back_forth", "one-sided derivatives of c equal minus those of C",
              max(bf.mismatch_minus, bf.mismatch_plus), 0.02)
    rows = []
    for g in [g for g in gammas if g != 0]:
        mi = measure_identity_check(spec, h, g, lams, base, limits=curve.limits)
        for z in mi.vertices:
            rows.append((g, z, mi.residual_a[z], mi.residual_b[z]))
        rep.check(f"measure_identity_a[{g}]", "<sigma, u0> = 0 for discounted occupation limits", mi.max_a, 1e-4)
        rep.check(f"measure_identity_b[{g}]", "gamma <mu, P> + <mu, u^gamma> = 0 on the dilation pipeline", mi.max_b, 1e-3)
        rep.check(f"measure_inequality_c[{g}]", "gamma <mu, P> + <mu, u^gamma> <= 0 on the optimal face", mi.max_c, 1e-6)
    rep.tables["measure_identities"] = Table(["gamma", "vertex", "residual_a", "residual_b"], rows)
    rep.provenance.setdefault("grid_sizes", {})["discount_limit"] = base.grid.n


def _run_hopf_cole(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .hopf_cole import eigencurve_p2, hopf_cole_transform, principal_eigenpair, shape_derivative

    dom, h = cfg.domain_obj(), float(cfg.grid["h"])
    eps, f = float(cfg.lagrangian["epsilon"]), cfg.running_cost()
    pair = principal_eigenpair(dom, f, eps, h)
    sd = shape_derivative(pair, dom)
    rep.tables["boundary_flux"] = Table(["x", "dw_dn", "x_dot_n"],
                                        [(float(p[0]), d, float(p @ n)) for p, n, d in
                                         zip(pair.boundary_points, pair.normals, pair.normal_derivative)])
    lams = [l for l in (-0.1, -0.05, 0.0, 0.05, 0.1)]
    cur = eigencurve_p2(dom, f, eps, lams, h)
    rep.tables["eigencurve_p2"] = Table(["lambda", "c"], list(zip(cur.lambdas, cur.c)), ("lambda", "c"))
    rep.tables["p2_summary"] = Table(["c", "shape_derivative", "fd_derivative", "fd_second_derivative"],
                                     [(pair.c, sd, cur.cprime_fd, cur.csecond_fd)])
    rep.check("eigenfunction_positive", "principal eigenfunction is positive", 0.0 if pair.positive else 1.0, 0.0)
    rep.check("shape_vs_fd", "boundary-flux derivative matches finite differences", cur.mismatch, 0.01)
    if f.kind == "constant":
        K = float(f(np.zeros((1, dom.dim)))[0])
        if dom.kind == "interval":
            exact = eps**2 * np.pi**2 / (4 * dom.half_width**2)
        else:
            exact = eps**2 * 2.404825557695773**2 / dom.half_width**2
        rep.check("closed_form_eigenvalue", "principal eigenvalue equals the closed form",
                  abs(pair.c - K - exact) / exact, 1e-3)
        rep.check("closed_form_shape", "boundary-flux derivative equals -2 (c - K)",
                  abs(sd + 2 * exact) / (2 * exact), 0.01)
        rep.check("closed_form_second", "second derivative equals 6 (c - K)",
                  abs(cur.csecond_fd - 6 * exact) / (6 * exact), 0.03)
    if dom.dim == 1:
        hc = hopf_cole_transform(pair.w, eps, pair.grid, pair.c, f)
        rep.check("transform_defect", "log transform solves the quadratic ergodic equation in the core",
                  hc.defect, 10 * pair.grid.h)
    rep.provenance.setdefault("grid_sizes", {})["hopf_cole"] = int(pair.grid.interior.sum())


PIPELINE_RUNNERS = {
    "discounted": [_run_discounted],
    "eigencurve": [_run_eigencurve],
    "derivatives": [_run_derivatives],
    "discount-limit": [_run_discount_limit],
    "hopf-cole": [_run_hopf_cole],
    "full-suite": [_run_derivatives, _run_eigencurve, _run_discounted, _run_discount_limit],
}


def run_experiment(cfg: ExperimentConfig, emit: bool = True) -> RunReport:
    cfg.validate()
    rep = RunReport(cfg)
    rep.provenance["config_hash"] = cfg.digest
    t0 = time.perf_counter()
    for runner in PIPELINE_RUNNERS[cfg.pipeline]:
        name = runner.__name__.removeprefix("_run_")
        try:
            runner(cfg, rep)
        except Exception as exc:  # partial report with a failure section
            log.exception("pipeline %s failed", name)
            rep.failures[name] = f"{type(exc).__name__}: {exc}"
    rep.wall_time = time.perf_counter() - t0
    if emit:
        emit_report(rep)
    return rep


# ------------------------------------------------------------------ command line

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, Any] = load_config(args.config)
    raw["pipeline"] = SUBCOMMANDS[args.command]
    lg = dict(raw.get("lagrangian", {}))
    if raw["pipeline"] == "hopf-cole" and "p" not in lg:
        lg["p"] = 2.0
        lg.setdefault("epsilon", 1.0)
    if args.p is not None:
        lg["p"] = args.p
    if args.epsilon is not None:
        lg["epsilon"] = args.epsilon
    if args.f is not None:
        lg["f"] = {"kind": args.f, "params": {}}
    if lg:
        raw["lagrangian"] = lg
    if args.h is not None:
        raw["grid"] = {**raw.get("grid", {}), "h": args.h}
    if raw["pipeline"] == "hopf-cole" and args.h is None and "h" not in raw.get("grid", {}):
        raw["grid"] = {**raw.get("grid", {}), "h": 2 / 256}
    if args.out is not None:
        raw["output"] = args.out
    if os.environ.get(OUT_ENV):
        raw["output"] = os.environ[OUT_ENV]
    if args.format is not None:
        raw["formats"] = args.format.split(",")
    return ExperimentConfig.from_dict(raw)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjb-eigen", description="Ergodic constants of viscous HJB equations on dilated domains.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--h", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--f", help="running cost from the catalog")
        sp.add_argument("--out", help=f"output directory (overridden by ${OUT_ENV})")
        sp.add_argument("--format", help="comma-separated subset of csv,json,plot-data")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    rep = run_experiment(cfg)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.measured:.6g} (tol {c.tolerance:.3g})")
    for k, v in rep.failures.items():
        print(f"ERROR {k}: {v}")
    print(f"wrote {cfg.output} in {rep.wall_time:.1f}s")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
