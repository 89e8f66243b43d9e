"""Ergodic LP on the unit disk (p = 3, f = 0): c_h, its one-sided dilation derivatives and
the dilation identity c' = -q c."""
import argparse
import time
from dataclasses import dataclass

from hjb_eigen.ergodic_lp import ergodic_lp_solve, onesided_derivatives
from hjb_eigen.geometry import build_grid, make_domain
from hjb_eigen.lagrangian import LagrangianSpec, running_cost
from hjb_eigen.markov_chain import assemble_mdp


@dataclass
class Config:
    p: float = 3.0
    eps: float = 0.1
    spacings: tuple = (0.2, 0.1, 0.05)
    cost: str = "zero"


def main(cfg: Config):
    spec = LagrangianSpec(cfg.p, cfg.eps, running_cost(cfg.cost))
    disk = make_domain("disk", R=1.0)
    for h in cfg.spacings:
        t = time.perf_counter()
        res = ergodic_lp_solve(assemble_mdp(build_grid(disk, h), spec))
        d = onesided_derivatives(res)
        print(f"h={h:.3f} nodes={res.mdp.n:5d}  c={res.c_h:+.8f}  gap={res.duality_gap:.1e}  "
              f"c'-={d.c_minus:+.6f}  c'+={d.c_plus:+.6f}  -q c={-spec.q * res.c_h:+.6f}  "
              f"({time.perf_counter() - t:.1f} s)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cost", default=Config.cost)
    main(Config(cost=ap.parse_args().cost))
