"""c(lambda) with one-sided face-LP derivatives for each catalog running cost."""
import argparse
from dataclasses import dataclass

import numpy as np

from hjb_eigen.ergodic_lp import eigencurve, write_curve_csv
from hjb_eigen.lagrangian import LagrangianSpec, running_cost


@dataclass
class Config:
    p: float = 3.0
    eps: float = 0.1
    h: float = 1 / 200
    costs: tuple = ("zero", "bump", "cosine", "affine")
    grid_mode: str = "dilated"
    prefix: str = "eigencurve"


def main(cfg: Config):
    for name in cfg.costs:
        spec = LagrangianSpec(cfg.p, cfg.eps, running_cost(name))
        curve = eigencurve(spec, h=cfg.h, grid_mode=cfg.grid_mode)
        k0 = curve.at(0.0)
        _, sd = curve.second_differences()
        print(f"{name:7s} c(0)={curve.c[k0]:+.8f}  c'-={curve.cprime_minus[k0]:+.6f}  c'+={curve.cprime_plus[k0]:+.6f}"
              f"  monotone={curve.monotone}  Lip={curve.lipschitz:.4f}  min second difference={sd.min():+.4f}")
        if curve.failures:
            print("   failed samples:", curve.failures)
        write_curve_csv(f"{cfg.prefix}_{name}.csv", curve)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=Config.h)
    ap.add_argument("--grid-mode", default=Config.grid_mode, choices=("fixed", "dilated"))
    a = ap.parse_args()
    main(Config(h=a.h, grid_mode=a.grid_mode))
