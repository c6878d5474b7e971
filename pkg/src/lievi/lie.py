"""Matrix Lie groups SO(3), SE(3), generic quadratic groups and R^n.

Algebra elements are coordinate vectors in a fixed basis.  For se(3) the
ordering is ``(u, v)``: rotational part first, translational part second.
Covectors are coordinate vectors dual to the algebra under the Euclidean
pairing, so every starred operator is the transpose of its coordinate matrix.

All functions accept stacked inputs (leading batch axes) where it is cheap to
do so; the trailing axes carry the vector or matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.spatial.transform import Rotation

MEMBERSHIP_TOL = 1e-9


class GroupMembershipError(ValueError):
    """A matrix does not satisfy the defining relation of its group."""


def hat3(x):
    """Map ``x`` in R^3 to the antisymmetric matrix with ``hat3(x) @ y == x × y``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (3, 3))
    out[..., 0, 1] = -x[..., 2]
    out[..., 0, 2] = x[..., 1]
    out[..., 1, 0] = x[..., 2]
    out[..., 1, 2] = -x[..., 0]
    out[..., 2, 0] = -x[..., 1]
    out[..., 2, 1] = x[..., 0]
    return out


def vee3(X, tol=MEMBERSHIP_TOL):
    """Inverse of :func:`hat3`.

    Raises
    ------
    ValueError
        If ``X`` is not antisymmetric to within ``tol`` (Frobenius norm of
        ``X + X^T``).
    """
    X = np.asarray(X, dtype=float)
    sym = np.linalg.norm(X + np.swapaxes(X, -1, -2), axis=(-2, -1))
    if np.any(sym > tol):
        raise ValueError(f"matrix is not antisymmetric (|X + X^T| = {np.max(sym):.3e})")
    return np.stack([X[..., 2, 1], X[..., 0, 2], X[..., 1, 0]], axis=-1)


def wedge_se3(phi):
    """4x4 matrix ``[[hat(u), v], [0, 0]]`` of ``phi = (u, v)``."""
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape[:-1] + (4, 4))
    out[..., :3, :3] = hat3(phi[..., :3])
    out[..., :3, 3] = phi[..., 3:]
    return out


def vee_se3(X, tol=MEMBERSHIP_TOL):
    X = np.asarray(X, dtype=float)
    if np.any(np.abs(X[..., 3, :]) > tol):
        raise ValueError("bottom row of an se(3) matrix must vanish")
    return np.concatenate([vee3(X[..., :3, :3], tol), X[..., :3, 3]], axis=-1)


class MatrixLieGroup:
    """Common interface of the groups used throughout the package.

    Subclasses set ``name``, ``dim`` (algebra dimension) and ``n`` (matrix
    size) and override whatever has a closed form.  The defaults here work for
    any matrix group given ``wedge``/``vee``.
    """

    name = "matrix"
    dim = 0
    n = 0

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- algebra --------------------------------------------------------
    def wedge(self, x):
        raise NotImplementedError

    def vee(self, X):
        raise NotImplementedError

    def basis(self):
        """Wedged basis matrices, shape ``(dim, n, n)``."""
        return self.wedge(np.eye(self.dim))

    def ad_matrix(self, x):
        """Coordinate matrix of ``eta -> [x, eta]``."""
        X = self.wedge(x)[..., None, :, :]
        E = self.basis()
        cols = self.vee(X @ E - E @ X)  # (..., dim_eta, dim_out)
        return np.swapaxes(cols, -1, -2)

    def Ad_matrix(self, g):
        """Coordinate matrix of ``eta -> g eta g^{-1}``."""
        g = np.asarray(g, dtype=float)
        gi = self.inv(g)
        E = self.basis()
        cols = self.vee(g[..., None, :, :] @ E @ gi[..., None, :, :])
        return np.swapaxes(cols, -1, -2)

    # -- group ------------------------------------------------------------
    def identity(self):
        return np.eye(self.n)

    def mul(self, a, b):
        return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)

    def inv(self, g):
        g = np.asarray(g, dtype=float)
        if np.any(np.abs(np.linalg.det(g)) < 1e-300):
            raise np.linalg.LinAlgError("singular group element")
        return np.linalg.inv(g)

    def defect(self, g):
        """Violation of the group's defining relation (0 for exact members)."""
        raise NotImplementedError

    def check(self, g, tol=MEMBERSHIP_TOL):
        g = np.asarray(g, dtype=float)
        if g.shape[-2:] != (self.n, self.n):
            raise GroupMembershipError(f"{self.name}: expected {self.n}x{self.n} matrix, got {g.shape}")
        d = self.defect(g)
        if not np.all(np.isfinite(g)) or np.max(d) > tol:
            raise GroupMembershipError(f"{self.name}: membership defect {np.max(d):.3e} exceeds {tol:.1e}")
        return g

    def project(self, g):
        raise NotImplementedError(f"no projection onto {self.name}")

    def exp(self, x):
        """Exact exponential map (used by the exponential retraction)."""
        X = self.wedge(x)
        flat = X.reshape((-1, self.n, self.n))
        out = np.array([scipy.linalg.expm(m) for m in flat])
        return out.reshape(X.shape)

    def log(self, g):
        g = np.asarray(g, dtype=float)
        flat = g.reshape((-1, self.n, self.n))
        logs = np.array([np.real(scipy.linalg.logm(m)) for m in flat])
        return self.vee(logs.reshape(g.shape), tol=1e-6)

    def random(self, rng, scale=1.0, size=None):
        """Random element ``exp(x)`` with ``x`` uniform in a box of half-width ``scale``."""
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.exp(rng.uniform(-scale, scale, shape))


class SO3Group(MatrixLieGroup):
    name = "SO3"
    dim = 3
    n = 3

    def wedge(self, x):
        return hat3(x)

    def vee(self, X, tol=MEMBERSHIP_TOL):
        return vee3(X, tol)

    def ad_matrix(self, x):
        return hat3(x)

    def Ad_matrix(self, g):
        return np.array(g, dtype=float)

    def inv(self, g):
        return np.swapaxes(np.asarray(g, dtype=float), -1, -2)

    def defect(self, g):
        g = np.asarray(g, dtype=float)
        d = np.linalg.norm(np.swapaxes(g, -1, -2) @ g - np.eye(3), axis=(-2, -1))
        return np.where(np.linalg.det(g) > 0, d, np.inf)

    def project(self, g):
        U, _, Vt = np.linalg.svd(np.asarray(g, dtype=float))
        D = np.ones(U.shape[:-1])
        D[..., -1] = np.sign(np.linalg.det(U @ Vt))
        return (U * D[..., None, :]) @ Vt

    def exp(self, x):
        return Rotation.from_rotvec(np.asarray(x, dtype=float)).as_matrix()

    def log(self, g):
        return Rotation.from_matrix(np.asarray(g, dtype=float)).as_rotvec()


class SE3Group(MatrixLieGroup):
    name = "SE3"
    dim = 6
    n = 4

    def wedge(self, x):
        return wedge_se3(x)

    def vee(self, X, tol=MEMBERSHIP_TOL):
        return vee_se3(X, tol)

    def ad_matrix(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (6, 6))
        U = hat3(x[..., :3])
        out[..., :3, :3] = U
        out[..., 3:, 3:] = U
        out[..., 3:, :3] = hat3(x[..., 3:])
        return out

    def Ad_matrix(self, g):
        g = np.asarray(g, dtype=float)
        R = g[..., :3, :3]
        out = np.zeros(g.shape[:-2] + (6, 6))
        out[..., :3, :3] = R
        out[..., 3:, 3:] = R
        out[..., 3:, :3] = hat3(g[..., :3, 3]) @ R
        return out

    def inv(self, g):
        g = np.asarray(g, dtype=float)
        Rt = np.swapaxes(g[..., :3, :3], -1, -2)
        out = np.zeros_like(g)
        out[..., :3, :3] = Rt
        out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, g[..., :3, 3])
        out[..., 3, 3] = 1.0
        return out

    def defect(self, g):
        g = np.asarray(g, dtype=float)
        bottom_ok = np.all(g[..., 3, :] == np.array([0.0, 0.0, 0.0, 1.0]), axis=-1)
        return np.where(bottom_ok, SO3.defect(g[..., :3, :3]), np.inf)

    def project(self, g):
        g = np.array(g, dtype=float)
        g[..., :3, :3] = SO3.project(g[..., :3, :3])
        g[..., 3, :] = [0.0, 0.0, 0.0, 1.0]
        return g


class QuadraticGroup(MatrixLieGroup):
    """Matrix group ``{Y : Y^T P Y = P}`` with algebra ``{X : X^T P + P X = 0}``.

    Parameters
    ----------
    P : (n, n) array
        Defining matrix.
    basis : (d, n, n) array, optional
        Basis of the algebra.  If omitted it is computed as the null space of
        the linear map ``X -> X^T P + P X``.
    """

    def __init__(self, P, basis=None, name="quadratic"):
        self.P = np.asarray(P, dtype=float)
        self.n = self.P.shape[0]
        self.name = name
        if basis is None:
            n = self.n
            rows = []
            for i in range(n * n):
                E = np.zeros(n * n)
                E[i] = 1.0
                E = E.reshape(n, n)
                rows.append((E.T @ self.P + self.P @ E).ravel())
            null = scipy.linalg.null_space(np.array(rows).T)
            basis = null.T.reshape(-1, n, n)
        self._basis = np.asarray(basis, dtype=float)
        self.dim = self._basis.shape[0]
        self._flat = self._basis.reshape(self.dim, -1).T
        self._pinv = np.linalg.pinv(self._flat)

    def __repr__(self):
        return f"QuadraticGroup(name={self.name!r}, n={self.n}, dim={self.dim})"

    def basis(self):
        return self._basis

    def wedge(self, x):
        return np.einsum("...i,ijk->...jk", np.asarray(x, dtype=float), self._basis)

    def vee(self, X, tol=MEMBERSHIP_TOL):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(X.shape[:-2] + (-1,))
        x = flat @ self._pinv.T
        resid = np.linalg.norm(x @ self._flat.T - flat, axis=-1)
        if np.any(resid > tol * max(1.0, float(np.max(np.abs(flat), initial=0.0)))):
            raise ValueError(f"{self.name}: matrix is not in the algebra (residual {np.max(resid):.3e})")
        return x

    def defect(self, g):
        g = np.asarray(g, dtype=float)
        return np.linalg.norm(np.swapaxes(g, -1, -2) @ self.P @ g - self.P, axis=(-2, -1))


class AbelianGroup(MatrixLieGroup):
    """The additive group R^n.

    Elements and algebra vectors are both plain length-``n`` vectors; the
    group law is addition, every adjoint is the identity and every bracket
    vanishes.
    """

    def __init__(self, n):
        self.n = int(n)
        self.dim = int(n)
        self.name = f"R{n}"

    def __repr__(self):
        return f"AbelianGroup({self.n})"

    def wedge(self, x):
        return np.asarray(x, dtype=float)

    def vee(self, X, tol=MEMBERSHIP_TOL):
        return np.asarray(X, dtype=float)

    def ad_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.n, self.n))

    def Ad_matrix(self, g):
        g = np.asarray(g, dtype=float)
        return np.broadcast_to(np.eye(self.n), g.shape[:-1] + (self.n, self.n)).copy()

    def identity(self):
        return np.zeros(self.n)

    def mul(self, a, b):
        return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)

    def inv(self, g):
        return -np.asarray(g, dtype=float)

    def defect(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(np.all(np.isfinite(g), axis=-1), 0.0, np.inf)

    def check(self, g, tol=MEMBERSHIP_TOL):
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.n or not np.all(np.isfinite(g)):
            raise GroupMembershipError(f"{self.name}: expected finite vector of length {self.n}")
        return g

    def project(self, g):
        return np.asarray(g, dtype=float)

    def exp(self, x):
        return np.array(x, dtype=float)

    def log(self, g):
        return np.array(g, dtype=float)


SO3 = SO3Group()
SE3 = SE3Group()


def group_for(x):
    """Infer SO(3) or SE(3) from an algebra vector or a group matrix."""
    shape = np.shape(x)
    if shape[-2:] == (3, 3):
        return SO3
    if shape[-2:] == (4, 4):
        return SE3
    if shape[-1:] == (3,):
        return SO3
    if shape[-1:] == (6,):
        return SE3
    raise ValueError(f"cannot infer a group from shape {shape}; pass group= explicitly")


def _check_dims(group, *vecs):
    for v in vecs:
        if np.shape(v)[-1] != group.dim:
            raise ValueError(f"{group.name}: expected algebra dimension {group.dim}, got {np.shape(v)[-1]}")


def ad(xi, eta, group=None):
    """Bracket ``[xi, eta]`` in coordinates."""
    group = group or group_for(xi)
    _check_dims(group, xi, eta)
    return np.einsum("...ij,...j->...i", group.ad_matrix(xi), np.asarray(eta, dtype=float))


def ad_star(xi, mu, group=None):
    """Dual of ``ad``: ``<ad_star(xi, mu), eta> == <mu, ad(xi, eta)>``."""
    group = group or group_for(xi)
    _check_dims(group, xi, mu)
    return np.einsum("...ji,...j->...i", group.ad_matrix(xi), np.asarray(mu, dtype=float))


def Ad(g, eta, group=None):
    """Adjoint action ``g eta g^{-1}`` in coordinates."""
    group = group or group_for(g)
    _check_dims(group, eta)
    return np.einsum("...ij,...j->...i", group.Ad_matrix(g), np.asarray(eta, dtype=float))


def Ad_star(g, mu, group=None):
    """Dual of ``Ad``: ``<Ad_star(g, mu), eta> == <mu, Ad(g, eta)>``."""
    group = group or group_for(g)
    _check_dims(group, mu)
    return np.einsum("...ji,...j->...i", group.Ad_matrix(g), np.asarray(mu, dtype=float))


def group_mul(a, b, group=None):
    group = group or group_for(a)
    return group.mul(a, b)


def group_inv(g, group=None):
    group = group or group_for(g)
    return group.inv(g)


def group_identity(group):
    return group.identity()


def se3_matrix(R, r):
    """Assemble ``[[R, r], [0, 1]]``."""
    out = np.eye(4)
    out[:3, :3] = R
    out[:3, 3] = r
    return out
