"""Numerical laboratory for additive eigenvalues of state-constraint HJB equations on dilated domains."""
from .geometry import Domain, Grid, ScalingSchedule, build_grid, check_condition_A, make_domain, scale_domain
from .lagrangian import LagrangianSpec, RunningCost, running_cost

__all__ = [
    "Domain", "Grid", "ScalingSchedule", "build_grid", "check_condition_A", "make_domain", "scale_domain",
    "LagrangianSpec", "RunningCost", "running_cost",
]
