import numpy as np
import pytest
from scipy import integrate, optimize

from hjb_eigen.geometry import build_grid, make_domain
from hjb_eigen.lagrangian import LagrangianSpec, running_cost
from hjb_eigen.markov_chain import assemble_mdp

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def spec_for(f="zero", p=3.0, eps=0.1, **params) -> LagrangianSpec:
    return LagrangianSpec(p, eps, running_cost(f, **params))


def mdp_for(f="zero", h=1 / 200, a=1.0, p=3.0, eps=0.1):
    return assemble_mdp(build_grid(make_domain("interval", a=a), h), spec_for(f, p, eps))


def continuum_constant_zero_cost(p: float, eps: float, a: float) -> float:
    """Ergodic constant of |u'|^p - eps u'' = c on (-a, a) with state constraints.

    w = u' solves eps w' = |w|^p + k (k = -c) and must run from -inf to +inf across the
    interval, so 2a = eps * int_R dw / (|w|^p + k)."""
    def length(k):
        return eps * 2 * integrate.quad(lambda w: 1.0 / (w**p + k), 0, np.inf)[0]
    k = optimize.brentq(lambda k: length(k) - 2 * a, 1e-8, 1e3, xtol=1e-14)
    return -k


@pytest.fixture(scope="session")
def interval():
    return make_domain("interval", a=1.0)


@pytest.fixture(scope="session")
def discount_runs():
    """Base problems and C(gamma) curves for zero and bump costs, h = 1/200."""
    from hjb_eigen.discount_limit import base_problem, c_of_gamma
    out = {}
    for f in ("zero", "bump"):
        spec = spec_for(f)
        base = base_problem(spec, 1 / 200)
        out[f] = (spec, base, c_of_gamma(spec, base=base))
    return out
