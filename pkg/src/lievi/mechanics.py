"""Discrete Lagrangian mechanics on matrix Lie groups.

Derivatives with respect to group arguments are stored as covector
coordinates in the body (left-trivialized) form

    <lam, eta> = d/deps F(..., W tau(eps*eta), ...)

and the spatial (right-trivialized) form is obtained as ``Ad*_{W^{-1}} lam``.
With this convention the pullbacks written ``l*_W`` and ``r*_W`` in the
discrete Euler-Poincare literature become :func:`left_gradient` and
:func:`right_gradient`.

Every residual below, except :func:`dep1_residual`, equals the derivative of
its discrete action under the variation ``g_k -> g_k tau(eps*Sigma_k)`` at the
interior index it is evaluated at.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .lie import AbelianGroup, MatrixLieGroup, Ad_star
from .retractions import Cayley, Retraction
from .validation import FD_STEP, fd_gradient

RECONSTRUCTION_TOL = 1e-10


# ---------------------------------------------------------------------------
# Trivialized derivatives
# ---------------------------------------------------------------------------

def left_gradient(f, args, slot, group, step=FD_STEP):
    """Body-form derivative of ``f(*args)`` with respect to ``args[slot]``.

    Central differences along ``args[slot] @ cay(+-step * e_i)``; the Cayley
    curve stays exactly on the group and has the same tangent as the
    exponential one.
    """
    args = list(args)
    g = args[slot]
    curve = Cayley(group).tau
    out = np.empty(group.dim)
    for i in range(group.dim):
        e = np.zeros(group.dim)
        e[i] = step
        args[slot] = group.mul(g, curve(e))
        fp = f(*args)
        args[slot] = group.mul(g, curve(-e))
        fm = f(*args)
        out[i] = (fp - fm) / (2.0 * step)
    return out


def right_gradient(f, args, slot, group, step=FD_STEP):
    """Spatial-form derivative: ``<rho, eta> = d/deps f(..., tau(eps*eta) W, ...)``."""
    lam = left_gradient(f, args, slot, group, step)
    return to_spatial(group, args[slot], lam)


def to_spatial(group, W, lam):
    """Convert a body-form covector at ``W`` to spatial form: ``Ad*_{W^{-1}} lam``."""
    return Ad_star(group.inv(W), lam, group)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteLagrangian:
    """Two-point discrete Lagrangian ``L_d(q0, q1)`` on a group.

    ``d1``/``d2`` are optional analytic body-form derivatives with the same
    signature as ``func``; central differences are used when they are absent.
    """

    func: Callable
    group: MatrixLieGroup
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    fd_step: float = FD_STEP

    def __call__(self, q0, q1):
        return self.func(q0, q1)

    def D1(self, q0, q1):
        if self.d1 is not None:
            return np.asarray(self.d1(q0, q1), dtype=float)
        return left_gradient(self.func, (q0, q1), 0, self.group, self.fd_step)

    def D2(self, q0, q1):
        if self.d2 is not None:
            return np.asarray(self.d2(q0, q1), dtype=float)
        return left_gradient(self.func, (q0, q1), 1, self.group, self.fd_step)

    def D1_fd(self, q0, q1):
        return left_gradient(self.func, (q0, q1), 0, self.group, self.fd_step)

    def D2_fd(self, q0, q1):
        return left_gradient(self.func, (q0, q1), 1, self.group, self.fd_step)


@dataclass(frozen=True)
class ReducedDiscreteLagrangian:
    """Discrete Lagrangian ``l_d(xi0, xi1)`` of two algebra samples."""

    func: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None

    def __call__(self, xi0, xi1):
        return self.func(xi0, xi1)

    def D1(self, xi0, xi1):
        if self.d1 is not None:
            return np.asarray(self.d1(xi0, xi1), dtype=float)
        return fd_gradient(lambda x: self.func(x, xi1), xi0)

    def D2(self, xi0, xi1):
        if self.d2 is not None:
            return np.asarray(self.d2(xi0, xi1), dtype=float)
        return fd_gradient(lambda x: self.func(xi0, x), xi1)


@dataclass(frozen=True)
class GroupAction:
    """Action of a symmetry group on the configuration group.

    ``generator(xi, q)`` returns the fundamental vector field at ``q`` in the
    same body-trivialized coordinates used for derivatives on the
    configuration group.
    """

    act: Callable
    generator: Callable
    dim: int


def translation_action(n, copies=1):
    """R^n acting by simultaneous translation of ``copies`` points in R^n."""
    return GroupAction(
        act=lambda g, q: np.asarray(q, dtype=float) + np.tile(g, copies),
        generator=lambda xi, q: np.tile(np.asarray(xi, dtype=float), copies),
        dim=n,
    )


def left_multiplication_action(group):
    """``G`` acting on itself by left multiplication; ``xi_Q(q) = xi q``."""
    return GroupAction(
        act=lambda g, q: group.mul(g, q),
        generator=lambda xi, q: group.Ad_matrix(group.inv(q)) @ np.asarray(xi, dtype=float),
        dim=group.dim,
    )


@dataclass
class Trajectory:
    """Group points ``g_0..g_N`` with optional algebra samples ``xi_0..xi_{N-1}``."""

    points: np.ndarray
    h: float
    group: MatrixLieGroup
    algebra: Optional[np.ndarray] = None

    @property
    def N(self):
        return len(self.points) - 1

    def reconstruction_error(self, retraction: Retraction):
        """Max deviation of ``g_{k+1}`` from ``g_k tau(h xi_k)``."""
        if self.algebra is None:
            raise ValueError("trajectory carries no algebra samples")
        steps = retraction.tau(self.h * np.asarray(self.algebra))
        pred = self.group.mul(self.points[:-1], steps)
        return float(np.max(np.abs(pred - self.points[1:])))


def _points(traj):
    return traj.points if isinstance(traj, Trajectory) else traj


# ---------------------------------------------------------------------------
# First-order discrete mechanics
# ---------------------------------------------------------------------------

def action_sum(Ld, traj):
    """``sum_{k=1}^{N} L_d(q_{k-1}, q_k)``."""
    q = _points(traj)
    if len(q) < 2:
        raise ValueError("a trajectory needs at least two points")
    return float(sum(Ld(q[k - 1], q[k]) for k in range(1, len(q))))


def del_residual(Ld, traj, k):
    """Discrete Euler-Lagrange residual ``D1 L_d(q_k, q_{k+1}) + D2 L_d(q_{k-1}, q_k)``."""
    q = _points(traj)
    if not 1 <= k <= len(q) - 2:
        raise IndexError(f"interior index k={k} outside 1..{len(q) - 2}")
    return Ld.D1(q[k], q[k + 1]) + Ld.D2(q[k - 1], q[k])


def discrete_legendre_minus(Ld, q0, q1):
    return q0, -Ld.D1(q0, q1)


def discrete_legendre_plus(Ld, q0, q1):
    return q1, Ld.D2(q0, q1)


def discrete_momentum_map(Ld, action, q0, q1):
    """``<J_d, xi> = <D2 L_d(q0, q1), xi_Q(q1)>`` for each basis ``xi``."""
    p = Ld.D2(q0, q1)
    return np.array([p @ action.generator(e, q1) for e in np.eye(action.dim)])


def newton_law_lagrangian(M, h, V=None, grad_V=None, kinetic_factor=0.5):
    """Euler discretisation ``h [c (dq/h)^T M (dq/h) - V(q0)]`` on R^n with analytic derivatives.

    The default ``c = 1/2`` is the one whose derivatives are
    ``D1 = -M dq/h - h grad V(q0)`` and ``D2 = M dq/h``, i.e. the discrete
    Newton law.  ``kinetic_factor=1`` evaluates the unhalved form.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    c = float(kinetic_factor)
    V = V or (lambda q: 0.0)
    grad_V = grad_V or (lambda q: np.zeros(n))

    def func(q0, q1):
        dq = (np.asarray(q1) - np.asarray(q0)) / h
        return h * (c * dq @ M @ dq - V(q0))

    def d2(q0, q1):
        return 2.0 * c * M @ (np.asarray(q1) - np.asarray(q0)) / h

    def d1(q0, q1):
        return -d2(q0, q1) - h * np.asarray(grad_V(q0))

    return DiscreteLagrangian(func, AbelianGroup(n), d1, d2)


def newton_law_step(q_prev, q_curr, M, h, grad_V):
    """Discrete flow: solve ``M (q_next - 2 q + q_prev)/h^2 = -grad V(q)`` for ``q_next``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    accel = np.linalg.solve(M, -np.asarray(grad_V(q_curr), dtype=float))
    return 2.0 * np.asarray(q_curr) - np.asarray(q_prev) + h * h * accel


def integrate_newton_law(q0, q1, N, M, h, grad_V):
    """Iterate :func:`newton_law_step` to produce ``q_0..q_N``."""
    q = np.empty((N + 1, len(q0)))
    q[0], q[1] = q0, q1
    for k in range(1, N):
        q[k + 1] = newton_law_step(q[k - 1], q[k], M, h, grad_V)
    return q


# ---------------------------------------------------------------------------
# Discrete Euler-Poincare residuals
# ---------------------------------------------------------------------------

def dep1_residual(ld_reduced, W_prev, W_curr, group, step=FD_STEP):
    """First-order discrete Euler-Poincare residual ``r*_{W_k} l'(W_k) - l*_{W_{k-1}} l'(W_{k-1})``.

    This is the negative of the action derivative (and of :func:`del_residual`
    for the left-invariant lift ``L_d(g0, g1) = l(g0^{-1} g1)``).
    """
    rho = right_gradient(ld_reduced, (W_curr,), 0, group, step)
    lam = left_gradient(ld_reduced, (W_prev,), 0, group, step)
    return rho - lam


def _momenta(D1_next, D2_prev):
    return D1_next + D2_prev


def dep2_algebra_residual(ld, retraction, h, omegas):
    """Second-order discrete Euler-Poincare residual in algebra variables at index ``k``.

    ``omegas`` holds ``(Omega_{k-2}, Omega_{k-1}, Omega_k, Omega_{k+1})``.  If
    only the first three are given, the cost is taken to end at the pair
    ``(Omega_{k-1}, Omega_k)`` and the ``D1 l_d(Omega_k, Omega_{k+1})`` term
    is dropped.

    The result is ``h`` times the derivative of ``sum l_d`` with respect to
    the group variation at index ``k``.
    """
    om = [np.asarray(o, dtype=float) for o in omegas]
    if len(om) not in (3, 4):
        raise ValueError("need Omega_{k-2}, Omega_{k-1}, Omega_k and optionally Omega_{k+1}")
    p_prev = _momenta(ld.D1(om[1], om[2]), ld.D2(om[0], om[1]))
    p_curr = ld.D2(om[1], om[2])
    if len(om) == 4:
        p_curr = p_curr + ld.D1(om[2], om[3])
    x_prev, x_curr = h * om[1], h * om[2]
    group = retraction.group
    back = Ad_star(retraction.tau(x_prev), retraction.dtau_inv_star(x_prev, p_prev), group)
    return back - retraction.dtau_inv_star(x_curr, p_curr)


def stacked_dep2_algebra_residual(retraction, h, xs, d1_pairs, d2_pairs):
    """All interior residuals of :func:`dep2_algebra_residual` at once.

    Parameters
    ----------
    xs : (N, d) array
        Samples ``xi_0..xi_{N-1}``.
    d1_pairs, d2_pairs : (N-1, d) arrays
        ``D1 l_d(xi_j, xi_{j+1})`` and ``D2 l_d(xi_j, xi_{j+1})`` for
        ``j = 0..N-2``.

    Returns
    -------
    (N-2, d) array of residuals for ``k = 2..N-1``; the last one uses the
    truncated momentum because the cost ends at ``(xi_{N-2}, xi_{N-1})``.
    """
    xs = np.asarray(xs, dtype=float)
    N = xs.shape[0]
    P = np.zeros_like(xs)
    P[: N - 1] += d1_pairs
    P[1:] += d2_pairs
    x = h * xs[1:]
    T = retraction.dtau_inv_star(x, P[1:])  # j = 1..N-1
    taus = retraction.tau(x[:-1])
    back = np.einsum("...ji,...j->...i", retraction.group.Ad_matrix(taus), T[:-1])
    return back - T[1:]


def dep2_group_residual(ld, W, group=None):
    """Second-order discrete Euler-Poincare residual in group variables.

    ``W`` holds ``(W_{k-2}, W_{k-1}, W_k, W_{k+1})`` and ``ld`` is a
    :class:`DiscreteLagrangian` (or a plain callable of two group elements,
    in which case ``group`` is required).
    """
    ld = _as_lagrangian(ld, group)
    group = ld.group
    Wm2, Wm1, W0, Wp1 = W
    lam = ld.D1(Wm1, W0) + ld.D2(Wm2, Wm1)
    mu = ld.D1(W0, Wp1) + ld.D2(Wm1, W0)
    return lam - to_spatial(group, W0, mu)


def _as_lagrangian(ld, group):
    if isinstance(ld, DiscreteLagrangian):
        return ld
    if group is None:
        raise ValueError("group is required when passing a plain callable")
    return DiscreteLagrangian(ld, group)


def del2_group_residual(Ld, g, W, group, step=FD_STEP):
    """Second-order discrete Euler-Lagrange residual for ``L_d(g_k, W_k, W_{k+1})``.

    Parameters
    ----------
    g : ``(g_{k-2}, g_{k-1}, g_k)``
    W : ``(W_{k-2}, W_{k-1}, W_k, W_{k+1})`` with ``W_j = g_j^{-1} g_{j+1}``.

    Notes
    -----
    The derivative with respect to the base point enters as
    ``l*_{g_k} D1 L_d(g_k, W_k, W_{k+1})``: varying ``g_k`` moves the base
    point of the term that starts at ``k``.  (Printed versions of this
    equation place it at ``g_{k-1}``; the finite-difference derivative of the
    action selects ``g_k``.)
    """
    gm2, gm1, g0 = g
    Wm2, Wm1, W0, Wp1 = W
    for a, b, Wj in ((gm2, gm1, Wm2), (gm1, g0, Wm1)):
        err = np.max(np.abs(group.mul(group.inv(a), b) - Wj))
        if err > RECONSTRUCTION_TOL:
            raise ValueError(f"reconstruction W_j = g_j^-1 g_(j+1) violated by {err:.3e}")

    def grad(args, slot):
        return left_gradient(Ld, args, slot, group, step)

    here = (g0, W0, Wp1)
    mid = (gm1, Wm1, W0)
    back = (gm2, Wm2, Wm1)
    lam = grad(mid, 1) + grad(back, 2)
    mu = grad(here, 1) + grad(mid, 2)
    return grad(here, 0) + lam - to_spatial(group, W0, mu)


def depk_residual(ld, window, k, group, step=FD_STEP):
    """Discrete k-th order Euler-Poincare residual at index ``i``.

    ``ld`` takes ``k`` group arguments; ``window`` holds the ``2k`` elements
    ``W_{i-k}..W_{i+k-1}``.  Slot ``j`` in the usual ``D_j`` notation counts
    from 2 (slot 1 being the dropped base point), so ``D_j`` differentiates
    the ``(j-1)``-th argument of ``ld``.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    window = list(window)
    if len(window) != 2 * k:
        raise ValueError(f"window must hold 2k = {2 * k} elements, got {len(window)}")
    W_curr = window[k]
    lam = np.zeros(group.dim)
    mu = np.zeros(group.dim)
    for j in range(2, k + 2):
        lam += left_gradient(ld, window[k - j + 1: 2 * k - j + 1], j - 2, group, step)
        mu += left_gradient(ld, window[k - j + 2: 2 * k - j + 2], j - 2, group, step)
    return lam - to_spatial(group, W_curr, mu)
