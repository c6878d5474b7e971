"""Independent numerical oracles.

Central finite differences, residuals of the continuous equations evaluated
on sampled curves, convergence-order fits and group-closure diagnostics.
Every order claim made elsewhere in the package is computed with
:func:`convergence_order` or :func:`iteration_order`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lie import SO3, ad_star

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


class FiniteDifferenceError(FloatingPointError):
    """A function evaluation inside a difference stencil was not finite."""


def _steps(x, step):
    if step is None:
        return FD_STEP * np.maximum(1.0, np.abs(x))
    return np.broadcast_to(np.asarray(step, dtype=float), x.shape)


def fd_gradient(f, x, step=None):
    """Central-difference gradient of a scalar function.

    ``step`` may be a scalar or a per-component array; by default it is
    ``eps**(1/3) * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    steps = _steps(x, step).ravel()
    if np.any(steps <= 0):
        raise ValueError("finite-difference step must be positive")
    grad = np.empty_like(flat)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        fp = f(xp.reshape(x.shape))
        fm = f(xm.reshape(x.shape))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FiniteDifferenceError(f"non-finite function value while differencing component {i}")
        grad[i] = (fp - fm) / (2.0 * steps[i])
    return grad.reshape(x.shape)


def fd_jacobian(F, x, step=None):
    """Central-difference Jacobian ``J[i, j] = dF_i / dx_j`` of a vector function."""
    x = np.asarray(x, dtype=float).ravel()
    steps = _steps(x, step)
    if np.any(steps <= 0):
        raise ValueError("finite-difference step must be positive")
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += steps[j]
        xm[j] -= steps[j]
        fp = np.asarray(F(xp), dtype=float).ravel()
        fm = np.asarray(F(xm), dtype=float).ravel()
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise FiniteDifferenceError(f"non-finite function value while differencing column {j}")
        cols.append((fp - fm) / (2.0 * steps[j]))
    return np.stack(cols, axis=1)


@dataclass
class ConvergenceReport:
    hs: np.ndarray
    norms: np.ndarray
    slope: float
    local_orders: np.ndarray
    floored: bool = False

    def as_dict(self):
        return {
            "h": self.hs.tolist(),
            "norms": self.norms.tolist(),
            "slope": self.slope,
            "local_orders": self.local_orders.tolist(),
            "floored": self.floored,
        }


def convergence_order(hs, norms):
    """Least-squares slope of ``log(norm)`` against ``log(h)``.

    Zero norms are floored at machine epsilon and flagged in the report.
    """
    hs = np.asarray(hs, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if hs.size < 3 or hs.size != norms.size:
        raise ValueError("need at least three (h, norm) pairs of equal length")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("step sizes must be strictly decreasing")
    if np.any(norms < 0):
        raise ValueError("norms must be non-negative")
    eps = np.finfo(float).eps
    floored = bool(np.any(norms < eps))
    clipped = np.maximum(norms, eps)
    lh, ln = np.log(hs), np.log(clipped)
    slope = float(np.polyfit(lh, ln, 1)[0])
    local = np.diff(ln) / np.diff(lh)
    return ConvergenceReport(hs, norms, slope, local, floored)


def iteration_order(errors):
    """Order ``q`` estimated from the last three terms of an error sequence,
    assuming ``e_{k+1} ~ C e_k^q``."""
    e = np.asarray(errors, dtype=float)
    if e.size < 3:
        raise ValueError("need at least three errors")
    e0, e1, e2 = e[-3:]
    return float(np.log(e2 / e1) / np.log(e1 / e0))


def group_defect(points, group=SO3):
    """Per-point violation of the group relation, e.g. ``|R^T R - I|_F`` on SO(3)."""
    points = getattr(points, "points", points)
    return np.atleast_1d(group.defect(np.asarray(points, dtype=float)))


def _ddt(samples, h):
    return np.gradient(samples, h, axis=0, edge_order=2)


def continuous_ep2_residual(L, xi, h, group=None, dL_dxi=None, dL_dxidot=None):
    """Residual of the second-order Euler-Poincare equations on a sampled curve.

    Evaluates ``p'' - a' + ad*_xi a - ad*_xi p'`` with ``a = dL/dxi`` and
    ``p = dL/dxidot`` at every sample.  All time derivatives use second-order
    central stencils (one-sided second order at the ends, so the two samples
    at each end are less accurate and should be left out of norms).

    Parameters
    ----------
    L : callable ``L(xi, xidot) -> float``
    xi : (n, d) array of samples at spacing ``h``; ``n >= 5``.
    dL_dxi, dL_dxidot : optional analytic partial gradients; central
        differences of ``L`` are used otherwise.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] < 5:
        raise ValueError("need at least 5 samples")
    if group is None:
        group = SO3 if xi.shape[1] == 3 else None
    xidot = _ddt(xi, h)
    if dL_dxi is None:
        dL_dxi = lambda x, xd: fd_gradient(lambda y: L(y, xd), x)  # noqa: E731
    if dL_dxidot is None:
        dL_dxidot = lambda x, xd: fd_gradient(lambda y: L(x, y), xd)  # noqa: E731
    a = np.array([dL_dxi(x, xd) for x, xd in zip(xi, xidot)])
    p = np.array([dL_dxidot(x, xd) for x, xd in zip(xi, xidot)])
    pdot = _ddt(p, h)
    pddot = _ddt(pdot, h)
    pddot[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / h**2
    adot = _ddt(a, h)
    return pddot - adot + ad_star(xi, a, group) - ad_star(xi, pdot, group)


def rigid_continuous_residual(Omega, u, rho, h):
    """``dOmega_i/dt - rho_i Omega_j Omega_k - u_i`` at each sample (derivative by central stencil)."""
    Omega = np.asarray(Omega, dtype=float)
    u = np.asarray(u, dtype=float)
    if Omega.shape != u.shape:
        raise ValueError(f"length mismatch: Omega {Omega.shape} vs u {u.shape}")
    rho = np.asarray(rho, dtype=float)
    coupling = rho * np.stack(
        [Omega[:, 1] * Omega[:, 2], Omega[:, 0] * Omega[:, 2], Omega[:, 0] * Omega[:, 1]], axis=1
    )
    return _ddt(Omega, h) - coupling - u


def rod_continuous_residual(phi, f, l, K, phi_bar, h):
    """Residual of ``n' + n×u + f = 0`` and ``m' + n×v + m×u + l = 0`` per sample.

    ``(m, n)`` are the two halves of ``K (phi - phi_bar)`` and their arclength
    derivatives are taken by central stencils on the samples.
    """
    phi = np.asarray(phi, dtype=float)
    f = np.asarray(f, dtype=float)
    l = np.asarray(l, dtype=float)  # noqa: E741
    if not (phi.shape[0] == f.shape[0] == l.shape[0]):
        raise ValueError("phi, f and l must have the same number of samples")
    grad = (phi - np.asarray(phi_bar, dtype=float)) @ np.asarray(K, dtype=float).T
    m, n = grad[:, :3], grad[:, 3:]
    u, v = phi[:, :3], phi[:, 3:]
    mdot, ndot = _ddt(m, h), _ddt(n, h)
    first = ndot + np.cross(n, u) + f
    second = mdot + np.cross(n, v) + np.cross(m, u) + l
    return np.concatenate([first, second], axis=1)


@dataclass
class StudyCheck:
    """One measured quantity of a validation study against its threshold."""

    name: str
    value: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "passed": self.passed,
            **({"detail": self.detail} if self.detail else {}),
        }
