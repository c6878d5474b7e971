"""Optimal-control problems posed as square root-finding systems."""

from .newton import NewtonConfig, SolveReport, newton_solve
from .reconstruction import discrete_cost, reconstruct, terminal_constraint
from .rigid_body import (
    RigidBodyProblem,
    assemble_rigid_residual,
    rigid_controls,
    rigid_discrete_gradients,
    rigid_discrete_lagrangian,
    rigid_lagrangian,
    solve_rigid_body,
)
from .rod import (
    CosseratRodProblem,
    SplitCayley,
    assemble_rod_direct_residual,
    assemble_rod_residual,
    rod_controls,
    rod_internal_forces,
    rod_lagrangian,
    solve_rod,
)

__all__ = [
    "NewtonConfig", "SolveReport", "newton_solve",
    "discrete_cost", "reconstruct", "terminal_constraint",
    "RigidBodyProblem", "assemble_rigid_residual", "rigid_controls", "rigid_discrete_gradients",
    "rigid_discrete_lagrangian", "rigid_lagrangian", "solve_rigid_body",
    "CosseratRodProblem", "SplitCayley", "assemble_rod_direct_residual", "assemble_rod_residual",
    "rod_controls", "rod_internal_forces", "rod_lagrangian", "solve_rod",
]
