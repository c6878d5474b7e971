"""Retraction maps ``tau: g -> G`` with right-trivialized tangents.

A retraction provides ``tau``, its inverse near the identity, and the
right-trivialized tangent ``dtau_xi`` characterised by

    d/deps tau(xi + eps*eta) |_{eps=0} = wedge(dtau_xi eta) @ tau(xi)

together with its inverse and the dual of the inverse.  Two families are
available: the Cayley map (exact on quadratic groups, closed forms on SO(3)
and SE(3)) and the exponential map whose tangents are the Bernoulli series
truncated at a fixed order.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from scipy.special import bernoulli

from .lie import SO3, AbelianGroup, MatrixLieGroup, SE3Group, SO3Group, group_for, hat3

# 1 + trace(R) below this is treated as the rotation-by-pi singularity of cay^{-1}.
CAYLEY_INV_GUARD = 1e-10
_COND_LIMIT = 1e12


class RetractionDomainError(ValueError):
    """The argument lies outside the domain where the retraction is invertible."""


def _matvec(M, x):
    return np.einsum("...ij,...j->...i", M, np.asarray(x, dtype=float))


def _rmatvec(M, x):
    return np.einsum("...ji,...j->...i", M, np.asarray(x, dtype=float))


def _norm2(x):
    return np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# Closed forms on SO(3)
# ---------------------------------------------------------------------------

def cay_so3(omega):
    """Cayley map on so(3): ``I + 4/(4+|w|^2) (hat(w) + hat(w)^2/2)``."""
    omega = np.asarray(omega, dtype=float)
    W = hat3(omega)
    c = (4.0 / (4.0 + _norm2(omega)))[..., None, None]
    return np.eye(3) + c * (W + 0.5 * W @ W)


def dcay_so3(omega):
    """Right-trivialized tangent of :func:`cay_so3` as a 3x3 matrix."""
    omega = np.asarray(omega, dtype=float)
    c = (2.0 / (4.0 + _norm2(omega)))[..., None, None]
    return c * (2.0 * np.eye(3) + hat3(omega))


def dcay_inv_so3(omega):
    """Inverse of :func:`dcay_so3`: ``I - hat(w)/2 + w w^T / 4``."""
    omega = np.asarray(omega, dtype=float)
    return np.eye(3) - 0.5 * hat3(omega) + 0.25 * omega[..., :, None] * omega[..., None, :]


def cay_inv_so3(R):
    """Inverse Cayley map on SO(3); valid for rotation angles below pi."""
    R = np.asarray(R, dtype=float)
    tr1 = 1.0 + np.trace(R, axis1=-2, axis2=-1)
    if np.any(tr1 < CAYLEY_INV_GUARD):
        raise RetractionDomainError(
            f"cay^-1 undefined: rotation angle at or near pi (1 + trace = {np.min(tr1):.3e})"
        )
    A = R - np.swapaxes(R, -1, -2)
    w = np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)
    return 2.0 * w / tr1[..., None]


# ---------------------------------------------------------------------------
# Cayley on SE(3) and on generic quadratic groups
# ---------------------------------------------------------------------------

def cay_se3(phi):
    """Cayley map on se(3) in block form.

    Rotation block ``cay_so3(u)``; translation block ``(I - hat(u)/2)^{-1} v``,
    which equals ``(I + cay_so3(u)) v / 2``.  The translation agrees with
    ``dcay_so3(u) v`` only when ``u`` and ``v`` are orthogonal.
    """
    phi = np.asarray(phi, dtype=float)
    R = cay_so3(phi[..., :3])
    out = np.zeros(phi.shape[:-1] + (4, 4))
    out[..., :3, :3] = R
    out[..., :3, 3] = 0.5 * (phi[..., 3:] + _matvec(R, phi[..., 3:]))
    out[..., 3, 3] = 1.0
    return out


def cay_inv_se3(g):
    g = np.asarray(g, dtype=float)
    u = cay_inv_so3(g[..., :3, :3])
    t = g[..., :3, 3]
    v = t - 0.5 * np.cross(u, t)
    return np.concatenate([u, v], axis=-1)


def _check_invertible(A, what):
    cond = np.linalg.cond(A)
    if np.any(~np.isfinite(cond)) or np.any(cond > _COND_LIMIT):
        raise RetractionDomainError(f"{what} is singular (condition number {np.max(cond):.3e})")
    return A


def _solve_checked(A, B, what):
    return np.linalg.solve(_check_invertible(A, what), B)


def cay_quadratic(xi, group=None):
    """``(I - X/2)^{-1} (I + X/2)`` for ``X = wedge(xi)``."""
    group = group or group_for(xi)
    if isinstance(group, AbelianGroup):
        return np.array(xi, dtype=float)
    X = group.wedge(xi)
    eye = np.eye(group.n)
    return _solve_checked(eye - 0.5 * X, eye + 0.5 * X, "I - xi/2")


def cay_inv(g, group=None):
    """Inverse Cayley map ``2 (I + g)^{-1} (g - I)`` in coordinates.

    Raises
    ------
    RetractionDomainError
        If ``I + g`` is singular, e.g. a rotation by pi.
    """
    group = group or group_for(g)
    if isinstance(group, SO3Group):
        return cay_inv_so3(g)
    if isinstance(group, SE3Group):
        return cay_inv_se3(g)
    if isinstance(group, AbelianGroup):
        return np.array(g, dtype=float)
    g = np.asarray(g, dtype=float)
    eye = np.eye(group.n)
    return group.vee(2.0 * _solve_checked(eye + g, g - eye, "I + g"), tol=1e-8)


def dcay_generic_matrix(xi, group):
    """Coordinate matrix of ``eta -> (I - X/2)^{-1} wedge(eta) (I + X/2)^{-1}``."""
    if isinstance(group, AbelianGroup):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(np.eye(group.n), xi.shape + (group.n,)).copy()
    X = group.wedge(xi)
    eye = np.eye(group.n)
    A = np.linalg.inv(_check_invertible(eye - 0.5 * X, "I - xi/2"))
    B = np.linalg.inv(_check_invertible(eye + 0.5 * X, "I + xi/2"))
    E = group.basis()
    cols = group.vee(A[..., None, :, :] @ E @ B[..., None, :, :], tol=1e-8)
    return np.swapaxes(cols, -1, -2)


def dcay_inv_generic_matrix(xi, group):
    """Coordinate matrix of ``eta -> (I - X/2) wedge(eta) (I + X/2)``."""
    if isinstance(group, AbelianGroup):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(np.eye(group.n), xi.shape + (group.n,)).copy()
    X = group.wedge(xi)
    eye = np.eye(group.n)
    E = group.basis()
    cols = group.vee((eye - 0.5 * X)[..., None, :, :] @ E @ (eye + 0.5 * X)[..., None, :, :], tol=1e-8)
    return np.swapaxes(cols, -1, -2)


def dcay_generic(xi, eta, group=None):
    group = group or group_for(xi)
    return _matvec(dcay_generic_matrix(xi, group), eta)


def dcay_inv_generic(xi, eta, group=None):
    group = group or group_for(xi)
    return _matvec(dcay_inv_generic_matrix(xi, group), eta)


# ---------------------------------------------------------------------------
# Truncated dexp series
# ---------------------------------------------------------------------------

def _series_matrix(adx, coeffs):
    d = adx.shape[-1]
    term = np.broadcast_to(np.eye(d), adx.shape).copy()
    out = coeffs[0] * term
    for c in coeffs[1:]:
        term = adx @ term
        out = out + c * term
    return out


def dexp_coefficients(p):
    """Coefficients ``1/(j+1)!`` for ``j = 0..p``."""
    return [1.0 / factorial(j + 1) for j in range(p + 1)]


def dexp_inv_coefficients(p):
    """Coefficients ``B_j / j!`` for ``j = 0..p`` with ``B_1 = -1/2``."""
    B = bernoulli(p) if p > 0 else np.array([1.0])
    return [float(B[j]) / factorial(j) for j in range(p + 1)]


def dexp_truncated(xi, eta, p, group=None):
    """``sum_{j<=p} ad_xi^j eta / (j+1)!``."""
    if p < 0:
        raise ValueError("truncation order must be >= 0")
    group = group or group_for(xi)
    return _matvec(_series_matrix(group.ad_matrix(xi), dexp_coefficients(p)), eta)


def dexp_inv_truncated(xi, eta, p, group=None):
    """``sum_{j<=p} B_j ad_xi^j eta / j!``."""
    if p < 0:
        raise ValueError("truncation order must be >= 0")
    group = group or group_for(xi)
    return _matvec(_series_matrix(group.ad_matrix(xi), dexp_inv_coefficients(p)), eta)


# ---------------------------------------------------------------------------
# Retraction objects
# ---------------------------------------------------------------------------

class Retraction:
    """Bundle of ``tau``, ``tau_inv`` and the right-trivialized tangents on one group."""

    name = "retraction"

    def __init__(self, group: MatrixLieGroup):
        self.group = group

    def __repr__(self):
        return f"{type(self).__name__}({self.group!r})"

    def tau(self, xi):
        raise NotImplementedError

    def tau_inv(self, g):
        raise NotImplementedError

    def dtau_matrix(self, xi):
        raise NotImplementedError

    def dtau_inv_matrix(self, xi):
        raise NotImplementedError

    def dtau(self, xi, eta):
        return _matvec(self.dtau_matrix(xi), eta)

    def dtau_inv(self, xi, eta):
        return _matvec(self.dtau_inv_matrix(xi), eta)

    def dtau_inv_star(self, xi, mu):
        """``(dtau_xi^{-1})^*`` applied to a covector: transpose of the coordinate matrix."""
        return _rmatvec(self.dtau_inv_matrix(xi), mu)


class Cayley(Retraction):
    name = "cayley"

    def tau(self, xi):
        if isinstance(self.group, SO3Group):
            return cay_so3(xi)
        if isinstance(self.group, SE3Group):
            return cay_se3(xi)
        return cay_quadratic(xi, self.group)

    def tau_inv(self, g):
        return cay_inv(g, self.group)

    def dtau_matrix(self, xi):
        if isinstance(self.group, SO3Group):
            return dcay_so3(xi)
        return dcay_generic_matrix(xi, self.group)

    def dtau_inv_matrix(self, xi):
        if isinstance(self.group, SO3Group):
            return dcay_inv_so3(xi)
        return dcay_inv_generic_matrix(xi, self.group)


class TruncatedExp(Retraction):
    """Exponential map with Bernoulli-series tangents truncated at ``order``.

    ``tau`` and ``tau_inv`` are the exact exponential and logarithm; only the
    tangent maps are truncated, so ``dtau`` and ``dtau_inv`` are mutually
    inverse up to ``O(|xi|^(order+1))``.
    """

    def __init__(self, group, order):
        super().__init__(group)
        self.order = int(order)
        self.name = f"exp{self.order}"

    def __repr__(self):
        return f"TruncatedExp({self.group!r}, order={self.order})"

    def tau(self, xi):
        return self.group.exp(xi)

    def tau_inv(self, g):
        return self.group.log(g)

    def dtau_matrix(self, xi):
        return _series_matrix(self.group.ad_matrix(xi), dexp_coefficients(self.order))

    def dtau_inv_matrix(self, xi):
        return _series_matrix(self.group.ad_matrix(xi), dexp_inv_coefficients(self.order))


RETRACTION_NAMES = ("cayley", "exp1", "exp2", "exp4")


def get_retraction(name, group=SO3):
    """Look up a retraction by name token: ``cayley``, ``exp1``, ``exp2`` or ``exp4``."""
    if isinstance(name, Retraction):
        return name
    if name == "cayley":
        return Cayley(group)
    if name in ("exp1", "exp2", "exp4"):
        return TruncatedExp(group, int(name[3:]))
    raise ValueError(f"unknown retraction {name!r}; expected one of {', '.join(RETRACTION_NAMES)}")

