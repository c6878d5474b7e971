"""Optimal control of a static Cosserat (Kirchhoff) rod on SE(3).

Arclength plays the role of time.  Strains ``phi = (u, v)`` are the body
angular and linear strains, the internal energy is the quadratic
``(phi - phi_bar)^T K (phi - phi_bar) / 2`` and the external loads ``f``, ``l``
are the controls.  Two discretisations are available:

``cayley-full``
    ``Phi_{k+1} = Phi_k cay(h phi_k)`` with the matrix Cayley map on SE(3)
    and the generic discrete Euler-Poincare equations.
``direct-truncated``
    ``R_{k+1} = R_k cay(h u_k)``, ``r_{k+1} = r_k + h R_k v_k`` with the
    corresponding equations written out in rotational and translational
    blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..lie import SE3, SE3Group, hat3
from ..mechanics import ReducedDiscreteLagrangian, Trajectory, stacked_dep2_algebra_residual
from ..retractions import Retraction, cay_inv_so3, cay_so3, dcay_inv_so3, dcay_so3, get_retraction
from .newton import NewtonConfig, SolveReport, newton_solve
from .reconstruction import discrete_cost, geodesic_guess, reconstruct, terminal_constraint

SCHEMES = ("cayley-full", "direct-truncated")


class SplitCayley(Retraction):
    """``(u, v) -> [[cay(u), v], [0, 1]]``: Cayley on rotations, identity on translations.

    This is the one-step map of the truncated reconstruction
    ``r_{k+1} = r_k + h R_k v_k``.
    """

    name = "split-cayley"

    def __init__(self, group=SE3):
        if not isinstance(group, SE3Group):
            raise ValueError("SplitCayley is defined on SE(3) only")
        super().__init__(group)

    def tau(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (4, 4))
        out[..., :3, :3] = cay_so3(xi[..., :3])
        out[..., :3, 3] = xi[..., 3:]
        out[..., 3, 3] = 1.0
        return out

    def tau_inv(self, g):
        g = np.asarray(g, dtype=float)
        return np.concatenate([cay_inv_so3(g[..., :3, :3]), g[..., :3, 3]], axis=-1)

    def dtau_matrix(self, xi):
        xi = np.asarray(xi, dtype=float)
        D = dcay_so3(xi[..., :3])
        out = np.zeros(xi.shape[:-1] + (6, 6))
        out[..., :3, :3] = D
        out[..., 3:, :3] = hat3(xi[..., 3:]) @ D
        out[..., 3:, 3:] = np.eye(3)
        return out

    def dtau_inv_matrix(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (6, 6))
        out[..., :3, :3] = dcay_inv_so3(xi[..., :3])
        out[..., 3:, :3] = -hat3(xi[..., 3:])
        out[..., 3:, 3:] = np.eye(3)
        return out


@dataclass(frozen=True)
class CosseratRodProblem:
    """Boundary-value data for the rod control problem.

    ``K`` is the 6x6 stiffness (Hessian of the internal energy) in the
    ``(u, v)`` ordering; ``Phi0``/``PhiT`` are 4x4 homogeneous frames.
    """

    K: np.ndarray
    phi_bar: np.ndarray
    rho1: float
    Phi0: np.ndarray
    PhiT: np.ndarray
    phi0: np.ndarray
    N: int
    h: float
    scheme: str = "cayley-full"
    retraction: str = "cayley"
    phiT: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("K", "phi_bar", "Phi0", "PhiT", "phi0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.phiT is not None:
            object.__setattr__(self, "phiT", np.asarray(self.phiT, dtype=float))
        if self.K.shape != (6, 6) or not np.allclose(self.K, self.K.T, atol=1e-12):
            raise ValueError("K must be a symmetric 6x6 matrix")
        if np.min(np.linalg.eigvalsh(self.K)) <= 0:
            raise ValueError("K must be positive definite")
        if self.phi_bar.shape != (6,) or self.phi0.shape != (6,):
            raise ValueError("phi_bar and phi0 must be 6-vectors")
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"N must be an integer >= 4, got {self.N}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        SE3.check(self.Phi0)
        SE3.check(self.PhiT)

    @property
    def T(self):
        return self.N * self.h

    @property
    def step_map(self):
        """Retraction used in the reconstruction of this problem's scheme."""
        if self.scheme == "direct-truncated":
            return SplitCayley()
        return get_retraction(self.retraction, SE3)


class RodSolution(NamedTuple):
    trajectory: Trajectory
    controls: np.ndarray
    cost: float
    report: SolveReport


# ---------------------------------------------------------------------------
# Continuous quantities
# ---------------------------------------------------------------------------

def rod_internal_forces(phi, K, phi_bar):
    """Internal force ``n`` and moment ``m``: the ``v`` and ``u`` parts of ``K (phi - phi_bar)``."""
    grad = (np.asarray(phi, dtype=float) - phi_bar) @ np.asarray(K, dtype=float).T
    return grad[..., 3:], grad[..., :3]


def rod_controls(phi, phi_dot, K, phi_bar):
    """External loads ``(f, l)`` balancing the rod equilibrium equations.

    ``f = -(n' + n x u)``, ``l = -(m' + n x v + m x u)`` with
    ``(m', n') = K phi'``.
    """
    phi = np.asarray(phi, dtype=float)
    n, m = rod_internal_forces(phi, K, phi_bar)
    rate = np.asarray(phi_dot, dtype=float) @ np.asarray(K, dtype=float).T
    u, v = phi[..., :3], phi[..., 3:]
    f = -(rate[..., 3:] + np.cross(n, u))
    l = -(rate[..., :3] + np.cross(n, v) + np.cross(m, u))  # noqa: E741
    return f, l


def rod_lagrangian(phi, phi_dot, K, phi_bar, rho1):
    """``|f|^2 + rho1^2 |l|^2``."""
    f, l = rod_controls(phi, phi_dot, K, phi_bar)  # noqa: E741
    return np.sum(f * f, axis=-1) + rho1**2 * np.sum(l * l, axis=-1)


def rod_lagrangian_gradients(phi, phi_dot, K, phi_bar, rho1):
    """Analytic ``(dL/dphi, dL/dphi')``; accepts stacked samples."""
    phi = np.asarray(phi, dtype=float)
    K = np.asarray(K, dtype=float)
    f, l = rod_controls(phi, phi_dot, K, phi_bar)  # noqa: E741
    n, m = rod_internal_forces(phi, K, phi_bar)
    Ku, Kv = K[:3], K[3:]
    Eu = np.hstack([np.eye(3), np.zeros((3, 3))])
    Ev = np.hstack([np.zeros((3, 3)), np.eye(3)])
    U, V, Nh, Mh = hat3(phi[..., :3]), hat3(phi[..., 3:]), hat3(n), hat3(m)
    df_dphi = -(Nh @ Eu - U @ Kv)
    dl_dphi = -(Nh @ Ev - V @ Kv + Mh @ Eu - U @ Ku)
    w = 2.0 * rho1**2
    g_phi = 2.0 * np.einsum("...ji,...j->...i", df_dphi, f) + w * np.einsum("...ji,...j->...i", dl_dphi, l)
    g_rate = -2.0 * f @ Kv - w * l @ Ku
    return g_phi, g_rate


def rod_discrete_lagrangian(phi_k, phi_k1, K, phi_bar, rho1, h):
    """``h L(phi_k, (phi_{k+1} - phi_k)/h)``."""
    phi_k = np.asarray(phi_k, dtype=float)
    return h * rod_lagrangian(phi_k, (np.asarray(phi_k1) - phi_k) / h, K, phi_bar, rho1)


def rod_discrete_gradients(phi_k, phi_k1, K, phi_bar, rho1, h):
    phi_k = np.asarray(phi_k, dtype=float)
    g_phi, g_rate = rod_lagrangian_gradients(phi_k, (np.asarray(phi_k1) - phi_k) / h, K, phi_bar, rho1)
    return h * g_phi - g_rate, g_rate


def rod_reduced_lagrangian(problem):
    args = (problem.K, problem.phi_bar, problem.rho1, problem.h)
    return ReducedDiscreteLagrangian(
        func=lambda a, b: float(rod_discrete_lagrangian(a, b, *args)),
        d1=lambda a, b: rod_discrete_gradients(a, b, *args)[0],
        d2=lambda a, b: rod_discrete_gradients(a, b, *args)[1],
    )


# ---------------------------------------------------------------------------
# Residual assembly
# ---------------------------------------------------------------------------

def _samples(problem, unknowns):
    x = np.asarray(unknowns, dtype=float).reshape(-1, 6)
    if x.shape[0] != problem.N - 1:
        raise ValueError(f"expected {6 * (problem.N - 1)} unknowns, got {x.size}")
    return np.concatenate([problem.phi0[None, :], x])


def _momenta(problem, phis):
    d1, d2 = rod_discrete_gradients(phis[:-1], phis[1:], problem.K, problem.phi_bar, problem.rho1, problem.h)
    P = np.zeros_like(phis)
    P[:-1] += d1
    P[1:] += d2
    return P


def assemble_rod_residual(problem, unknowns):
    """Residual of the ``cayley-full`` scheme: ``6(N-2)`` interior entries then 6 terminal ones."""
    if problem.scheme != "cayley-full":
        raise ValueError("assemble_rod_residual needs scheme 'cayley-full'")
    phis = _samples(problem, unknowns)
    ret = problem.step_map
    h = problem.h
    d1, d2 = rod_discrete_gradients(phis[:-1], phis[1:], problem.K, problem.phi_bar, problem.rho1, h)
    interior = stacked_dep2_algebra_residual(ret, h, phis, d1, d2)
    term = terminal_constraint(phis, problem.Phi0, problem.PhiT, ret, h, SE3)
    return np.concatenate([interior.ravel(), term])


def coadjoint_sandwich(xi, omega):
    """``xi* omega xi*`` on so(3)*, defined by ``<xi* omega xi*, eta> = <omega, xi eta xi>``.

    For 3-vectors this is ``-(xi . omega) xi``.
    """
    xi = np.asarray(xi, dtype=float)
    return -np.sum(xi * omega, axis=-1, keepdims=True) * xi


def _ad_star(u, mu):
    return np.cross(mu, u)


def direct_interior_blocks(u, v, Ups, Ups3, h):
    """Rotational and translational blocks of the truncated scheme for ``k = 2..N-1``.

    ``u``, ``v`` are ``(N, 3)`` strain samples and ``Ups``, ``Ups3`` the
    ``u``- and ``v``-parts of ``D1 L_d(phi_k, phi_{k+1}) + D2 L_d(phi_{k-1}, phi_k)``
    for ``k = 0..N-1``.

    Notes
    -----
    ``Ad*_{g_{k-1}}`` with ``g_{k-1} = cay(h u_{k-1})`` is ``g_{k-1}^T``.  The
    ``ad*`` inside the pulled-back term acts with the strain ``u_{k-1}``
    generating ``g_{k-1}``.  The translational coupling is ``+h Ups3_k x v_k``
    under the bracket convention ``[a, b] = a x b``.
    """
    g = cay_so3(h * u[1:-1])
    a, ua = Ups[1:-1], u[1:-1]
    b, ub, vb = Ups[2:], u[2:], v[2:]
    back = a - 0.5 * h * _ad_star(ua, a) - 0.25 * h * h * coadjoint_sandwich(ua, a)
    here = b - 0.5 * h * _ad_star(ub, b) - 0.25 * h * h * coadjoint_sandwich(ub, b)
    rot = np.einsum("kji,kj->ki", g, back) - here + h * np.cross(Ups3[2:], vb)
    trans = np.einsum("kji,kj->ki", g, Ups3[1:-1]) - Ups3[2:]
    return rot, trans


def assemble_rod_direct_residual(problem, unknowns):
    """Residual of the ``direct-truncated`` scheme.

    Interior blocks for ``k = 2..N-1`` followed by ``cay^{-1}(R_N^T R_T)``
    and ``r_N - r_T``.
    """
    if problem.scheme != "direct-truncated":
        raise ValueError("assemble_rod_direct_residual needs scheme 'direct-truncated'")
    phis = _samples(problem, unknowns)
    P = _momenta(problem, phis)
    rot, trans = direct_interior_blocks(phis[:, :3], phis[:, 3:], P[:, :3], P[:, 3:], problem.h)
    interior = np.concatenate([rot, trans], axis=1)
    PhiN = reconstruct(problem.Phi0, phis, SplitCayley(), problem.h, SE3).points[-1]
    term_R = cay_inv_so3(PhiN[:3, :3].T @ problem.PhiT[:3, :3])
    term_r = PhiN[:3, 3] - problem.PhiT[:3, 3]
    return np.concatenate([interior.ravel(), term_R, term_r])


def rod_residual(problem, unknowns):
    if problem.scheme == "direct-truncated":
        return assemble_rod_direct_residual(problem, unknowns)
    return assemble_rod_residual(problem, unknowns)


def rod_initial_guess(problem):
    guess = geodesic_guess(problem.Phi0, problem.PhiT, problem.step_map, problem.N, problem.h, SE3)
    return np.tile(guess, problem.N - 1)


def rod_cost(problem, phis):
    return discrete_cost(rod_reduced_lagrangian(problem), phis)


def solve_rod(problem, config=None, x0=None):
    """Newton solve of the rod problem for the configured scheme.

    Returns
    -------
    RodSolution
        ``(trajectory, controls, cost, report)`` with ``controls`` rows
        ``(f_k, l_k)`` for ``k = 0..N-2``.
    """
    config = config or NewtonConfig()
    x0 = rod_initial_guess(problem) if x0 is None else np.asarray(x0, dtype=float).ravel()
    x, report = newton_solve(lambda z: rod_residual(problem, z), x0, config)
    phis = _samples(problem, x)
    traj = reconstruct(problem.Phi0, phis, problem.step_map, problem.h, SE3)
    f, l = rod_controls(phis[:-1], np.diff(phis, axis=0) / problem.h, problem.K, problem.phi_bar)  # noqa: E741
    end = traj.points[-1]
    report.terminal_error = {
        "R_fro": float(np.linalg.norm(end[:3, :3] - problem.PhiT[:3, :3])),
        "r": float(np.linalg.norm(end[:3, 3] - problem.PhiT[:3, 3])),
    }
    return RodSolution(traj, np.concatenate([f, l], axis=1), rod_cost(problem, phis), report)
