"""p = 2 checks: Dirichlet eigenvalue, boundary-flux shape derivative and c'' on the interval
and the disk, under grid refinement."""
from dataclasses import dataclass

import numpy as np
from scipy.special import jn_zeros

from hjb_eigen.geometry import make_domain
from hjb_eigen.hopf_cole import eigencurve_p2, principal_eigenpair, shape_derivative
from hjb_eigen.lagrangian import running_cost


@dataclass
class Config:
    interval_nodes: tuple = (64, 128, 256)
    disk_spacings: tuple = (1 / 10, 1 / 20, 1 / 40)


def main(cfg: Config):
    zero = running_cost("zero")
    iv = make_domain("interval", a=1.0)
    c0 = np.pi**2 / 4
    print("interval (-1, 1), exact c = pi^2/4, shape = -pi^2/2, c'' = 3 pi^2/2")
    for m in cfg.interval_nodes:
        h = 2 / (m + 1)
        pair = principal_eigenpair(iv, zero, 1.0, h)
        cur = eigencurve_p2(iv, zero, 1.0, h=h)
        print(f"  nodes={m:4d}  c err={abs(pair.c - c0) / c0:.2e}  shape err="
              f"{abs(shape_derivative(pair) + 2 * c0) / (2 * c0):.2e}  c'' err={abs(cur.csecond_fd - 6 * c0) / (6 * c0):.2e}")
    disk = make_domain("disk", R=1.0)
    j = jn_zeros(0, 1)[0] ** 2
    print("unit disk, exact c = j01^2, shape = -2 j01^2")
    for h in cfg.disk_spacings:
        pair = principal_eigenpair(disk, zero, 1.0, h)
        print(f"  h={h:.4f}  c err={abs(pair.c - j) / j:.2e}  shape err={abs(shape_derivative(pair) + 2 * j) / (2 * j):.2e}")


if __name__ == "__main__":
    main(Config())
