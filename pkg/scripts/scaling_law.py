"""Dilation law c(s*Omega) = s^-q c(Omega) for f = 0 on intervals, at several spacings,
next to the 1D continuum constant from the quadrature relation."""
import argparse
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from hjb_eigen.ergodic_lp import ergodic_lp_solve, sample_mdp
from hjb_eigen.geometry import make_domain
from hjb_eigen.io_utils import write_csv
from hjb_eigen.lagrangian import LagrangianSpec, running_cost


@dataclass
class Config:
    p: float = 3.0
    eps: float = 0.1
    a: float = 1.0
    spacings: tuple = (1 / 100, 1 / 200, 1 / 400)
    dilations: tuple = (-0.2, 0.0, 0.2, 0.4)
    out: str = "scaling_law.csv"


def continuum_constant(p, eps, a):
    # eps * int dw / (|w|^p + k) = 2a gives c = -k
    g = lambda k: eps * 2 * quad(lambda w: 1 / (w**p + k), 0, np.inf, limit=200)[0] - 2 * a
    return -brentq(g, 1e-8, 1e3)


def main(cfg: Config):
    spec = LagrangianSpec(cfg.p, cfg.eps, running_cost("zero"))
    base = make_domain("interval", a=cfg.a)
    rows = []
    for h in cfg.spacings:
        c0 = ergodic_lp_solve(sample_mdp(spec, base, h, 0.0)).c_h
        for r in cfg.dilations:
            c = ergodic_lp_solve(sample_mdp(spec, base, h, r)).c_h
            s = 1 + r
            ref = continuum_constant(cfg.p, cfg.eps, cfg.a * s)
            rows.append((h, s, c, c / c0, s ** -spec.q, ref))
            print(f"h={h:.5f} s={s:.2f}  c={c:+.8f}  ratio={c / c0:.6f}  s^-q={s ** -spec.q:.6f}  continuum={ref:+.8f}")
    write_csv(cfg.out, ["h", "s", "c_h", "ratio", "s_pow_minus_q", "continuum"], rows)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Config.out)
    main(Config(out=ap.parse_args().out))
