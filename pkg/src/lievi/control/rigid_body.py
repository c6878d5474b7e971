"""Optimal control of the fully actuated rigid body on SO(3).

The controlled dynamics are ``Omega' = c(Omega) + u`` with coupling
``c(Omega) = (rho_1 Omega_2 Omega_3, rho_2 Omega_1 Omega_3, rho_3 Omega_1 Omega_2)``
and the cost is the integral of ``|u|^2 / 2``.  Eliminating ``u`` gives a
second-order Lagrangian in ``(Omega, Omega')`` whose discrete Euler-Poincare
equations, together with the terminal attitude constraint, form a square
root-finding problem in ``Omega_1..Omega_{N-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..lie import SO3
from ..mechanics import ReducedDiscreteLagrangian, Trajectory, stacked_dep2_algebra_residual
from ..retractions import get_retraction
from .newton import NewtonConfig, SolveReport, newton_solve
from .reconstruction import discrete_cost, geodesic_guess, reconstruct, terminal_constraint


@dataclass(frozen=True)
class RigidBodyProblem:
    """Boundary-value data for the rigid-body control problem.

    ``strict=True`` additionally pins ``Omega_{N-1} = OmegaT`` and drops the
    last interior equation to keep the system square.  It is experimental.
    """

    rho: np.ndarray
    R0: np.ndarray
    RT: np.ndarray
    Omega0: np.ndarray
    N: int
    h: float
    retraction: str = "cayley"
    OmegaT: Optional[np.ndarray] = None
    strict: bool = False

    def __post_init__(self):
        for name in ("rho", "R0", "RT", "Omega0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.OmegaT is not None:
            object.__setattr__(self, "OmegaT", np.asarray(self.OmegaT, dtype=float))
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"N must be an integer >= 4, got {self.N}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.rho.shape != (3,) or self.Omega0.shape != (3,):
            raise ValueError("rho and Omega0 must be 3-vectors")
        SO3.check(self.R0)
        SO3.check(self.RT)
        if self.strict and self.OmegaT is None:
            raise ValueError("strict mode needs OmegaT")
        get_retraction(self.retraction, SO3)

    @property
    def T(self):
        return self.N * self.h

    @property
    def n_unknowns(self):
        return 3 * (self.N - 2 if self.strict else self.N - 1)


class RigidBodySolution(NamedTuple):
    trajectory: Trajectory
    controls: np.ndarray
    cost: float
    report: SolveReport


def rigid_coupling(Omega, rho):
    Omega = np.asarray(Omega, dtype=float)
    return np.asarray(rho, dtype=float) * np.stack(
        [Omega[..., 1] * Omega[..., 2], Omega[..., 0] * Omega[..., 2], Omega[..., 0] * Omega[..., 1]],
        axis=-1,
    )


def _coupling_jac_T(Omega, rho, w):
    """``J_c(Omega)^T w`` where ``J_c`` is the Jacobian of :func:`rigid_coupling`."""
    O, w = np.asarray(Omega, dtype=float), np.asarray(w, dtype=float)
    r = np.asarray(rho, dtype=float)
    return np.stack(
        [
            r[1] * O[..., 2] * w[..., 1] + r[2] * O[..., 1] * w[..., 2],
            r[0] * O[..., 2] * w[..., 0] + r[2] * O[..., 0] * w[..., 2],
            r[0] * O[..., 1] * w[..., 0] + r[1] * O[..., 0] * w[..., 1],
        ],
        axis=-1,
    )


def rigid_controls(Omega, Omega_dot, rho):
    """Control torque ``u = Omega' - c(Omega)``."""
    return np.asarray(Omega_dot, dtype=float) - rigid_coupling(Omega, rho)


def rigid_lagrangian(Omega, Omega_dot, rho):
    """``|u|^2 / 2`` with ``u`` from :func:`rigid_controls`."""
    u = rigid_controls(Omega, Omega_dot, rho)
    return 0.5 * np.sum(u * u, axis=-1)


def rigid_discrete_lagrangian(Omega_k, Omega_k1, rho, h):
    """``h l(Omega_k, (Omega_{k+1} - Omega_k)/h)``."""
    Omega_k = np.asarray(Omega_k, dtype=float)
    return h * rigid_lagrangian(Omega_k, (np.asarray(Omega_k1) - Omega_k) / h, rho)


def rigid_discrete_gradients(Omega_k, Omega_k1, rho, h):
    """Analytic ``(D1 l_d, D2 l_d)``; accepts stacked pairs."""
    Omega_k = np.asarray(Omega_k, dtype=float)
    u = rigid_controls(Omega_k, (np.asarray(Omega_k1) - Omega_k) / h, rho)
    return -u - h * _coupling_jac_T(Omega_k, rho, u), u


def rigid_reduced_lagrangian(rho, h):
    return ReducedDiscreteLagrangian(
        func=lambda a, b: float(rigid_discrete_lagrangian(a, b, rho, h)),
        d1=lambda a, b: rigid_discrete_gradients(a, b, rho, h)[0],
        d2=lambda a, b: rigid_discrete_gradients(a, b, rho, h)[1],
    )


def _samples(problem, unknowns):
    """Full ``Omega_0..Omega_{N-1}`` from the unknown vector."""
    x = np.asarray(unknowns, dtype=float).reshape(-1, 3)
    rows = [problem.Omega0[None, :], x]
    if problem.strict:
        rows.append(problem.OmegaT[None, :])
    Omegas = np.concatenate(rows)
    if Omegas.shape[0] != problem.N:
        raise ValueError(f"expected {problem.n_unknowns} unknowns, got {x.size}")
    return Omegas


def assemble_rigid_residual(problem, unknowns):
    """Interior discrete Euler-Poincare blocks followed by the terminal constraint.

    ``unknowns`` holds ``Omega_1..Omega_{N-1}`` (flat or ``(N-1, 3)``); the
    result has the same length.  The cost is summed over the available
    pairs ``(Omega_k, Omega_{k+1})``, ``k = 0..N-2``.
    """
    Omegas = _samples(problem, unknowns)
    ret = get_retraction(problem.retraction, SO3)
    h = problem.h
    d1, d2 = rigid_discrete_gradients(Omegas[:-1], Omegas[1:], problem.rho, h)
    interior = stacked_dep2_algebra_residual(ret, h, Omegas, d1, d2)
    if problem.strict:
        interior = interior[:-1]
    term = terminal_constraint(Omegas, problem.R0, problem.RT, ret, h)
    return np.concatenate([interior.ravel(), term])


def rigid_initial_guess(problem):
    """Constant ``tau^{-1}(R0^{-1} RT) / (N h)`` for ``Omega_1..Omega_{N-1}``."""
    guess = geodesic_guess(problem.R0, problem.RT, problem.retraction, problem.N, problem.h)
    n = problem.N - 2 if problem.strict else problem.N - 1
    return np.tile(guess, n)


def rigid_cost(problem, Omegas):
    ld = rigid_reduced_lagrangian(problem.rho, problem.h)
    return discrete_cost(ld, Omegas)


def solve_rigid_body(problem, config=None, x0=None):
    """Solve the discrete optimal-control problem by Newton's method.

    Returns
    -------
    RigidBodySolution
        ``(trajectory, controls, cost, report)``.  ``controls`` has rows
        ``u_0..u_{N-2}``; the last step's control would need ``Omega_N``.
        The trajectory is emitted even when the solve fails.
    """
    config = config or NewtonConfig()
    x0 = rigid_initial_guess(problem) if x0 is None else np.asarray(x0, dtype=float).ravel()
    x, report = newton_solve(lambda z: assemble_rigid_residual(problem, z), x0, config)
    Omegas = _samples(problem, x)
    traj = reconstruct(problem.R0, Omegas, problem.retraction, problem.h)
    controls = rigid_controls(Omegas[:-1], np.diff(Omegas, axis=0) / problem.h, problem.rho)
    report.terminal_error = {"R_fro": float(np.linalg.norm(traj.points[-1] - problem.RT))}
    return RigidBodySolution(traj, controls, rigid_cost(problem, Omegas), report)
