"""Vanishing-discount limits on dilating domains: C(gamma), the back-and-forth comparison
with the face-LP derivatives, and the measure identities."""
import argparse
from dataclasses import dataclass

from hjb_eigen.discount_limit import (back_forth_check, base_problem, c_of_gamma, measure_identity_check,
                                      write_cauchy_csv, write_cgamma_csv)
from hjb_eigen.lagrangian import LagrangianSpec, running_cost


@dataclass
class Config:
    p: float = 3.0
    eps: float = 0.1
    h: float = 1 / 200
    cost: str = "bump"
    gammas: tuple = (-0.5, -0.25, 0.0, 0.25, 0.5)


def main(cfg: Config):
    spec = LagrangianSpec(cfg.p, cfg.eps, running_cost(cfg.cost))
    base = base_problem(spec, cfg.h)
    curve = c_of_gamma(spec, cfg.gammas, h=cfg.h, base=base)
    print(f"c(0) = {base.c0:+.10f}")
    for g, C, d in zip(curve.gammas, curve.C, curve.defects):
        print(f"gamma={g:+.2f}  C={C:+.8f}  constancy defect={d:.2e}")
    print("decreasing:", curve.decreasing, " concave:", curve.concave)
    bf = back_forth_check(spec, cfg.h, cfg.gammas, base=base, curve=curve)
    print(f"c'- {bf.cprime_minus:+.6f} <= -C'- {bf.neg_Cprime_minus:+.6f} <= -C'+ {bf.neg_Cprime_plus:+.6f}"
          f" <= c'+ {bf.cprime_plus:+.6f}   ordered={bf.ordered}")
    for g in (0.25, -0.25):
        rep = measure_identity_check(spec, cfg.h, g, base=base, limits=dict(curve.limits))
        print(f"gamma={g:+.2f}  (a) {rep.max_a:.2e}  (b) {rep.max_b:.2e}  (c) {rep.max_c:+.2e}")
    write_cgamma_csv(f"cgamma_{cfg.cost}.csv", curve)
    write_cauchy_csv(f"cauchy_{cfg.cost}.csv", curve.limits[0.0])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cost", default=Config.cost)
    ap.add_argument("--h", type=float, default=Config.h)
    a = ap.parse_args()
    main(Config(h=a.h, cost=a.cost))
