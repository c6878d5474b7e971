"""Damped Newton iteration with a central-difference Jacobian."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from ..validation import FiniteDifferenceError


@dataclass(frozen=True)
class NewtonConfig:
    """Solver settings.

    ``fd_step`` is relative: column ``j`` of the Jacobian uses the step
    ``fd_step * max(1, |x_j|)``.
    """

    tol: float = 1e-10
    max_iter: int = 100
    fd_step: float = 1e-6
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 30
    tikhonov: float = 1e-8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        for name in ("contraction", "sufficient_decrease"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    history: list = field(default_factory=list)
    wall_time: float = 0.0
    message: str = ""
    terminal_error: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def jacobian(F, x, fx=None, rel_step=1e-6):
    """Central-difference Jacobian with per-component step ``rel_step * max(1, |x_j|)``."""
    x = np.asarray(x, dtype=float)
    steps = rel_step * np.maximum(1.0, np.abs(x))
    m = x.size if fx is None else np.size(fx)
    J = np.empty((m, x.size))
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += steps[j]
        xm[j] -= steps[j]
        fp = np.asarray(F(xp), dtype=float)
        fm = np.asarray(F(xm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise FiniteDifferenceError(f"non-finite residual while differencing column {j}")
        J[:, j] = (fp - fm) / (2.0 * steps[j])
    return J


def _direction(J, fx, mu_scale):
    try:
        if np.linalg.cond(J) < 1e12:
            return np.linalg.solve(J, -fx), False
    except np.linalg.LinAlgError:
        pass
    mu = mu_scale * max(np.linalg.norm(J), np.finfo(float).tiny)
    A = J.T @ J + mu * np.eye(J.shape[1])
    return np.linalg.solve(A, -J.T @ fx), True


def newton_solve(F, x0, config=None, jac=None):
    """Find a root of the square system ``F(x) = 0``.

    Each iteration solves ``J dx = -F`` (with a Tikhonov-regularized normal
    equation when ``J`` is numerically singular) and backtracks on
    ``|F|^2`` until the Armijo condition holds.  A report is always
    returned; failing to converge is not an exception.

    Parameters
    ----------
    F : callable
        Residual map ``R^n -> R^n``.
    x0 : array_like
    config : NewtonConfig, optional
    jac : callable, optional
        Analytic Jacobian; central differences otherwise.

    Returns
    -------
    x : ndarray
        Last iterate.
    report : SolveReport
    """
    config = config or NewtonConfig()
    start = time.perf_counter()
    x = np.array(x0, dtype=float).ravel()
    fx = np.asarray(F(x), dtype=float).ravel()
    if fx.size != x.size:
        raise ValueError(f"system is not square: {fx.size} equations for {x.size} unknowns")
    history = [float(np.max(np.abs(fx)))]

    def report(converged, it, message):
        return SolveReport(converged, it, history[-1], history,
                           time.perf_counter() - start, message)

    if not np.all(np.isfinite(fx)):
        return x, report(False, 0, "non-finite residual at the initial guess")

    for it in range(1, config.max_iter + 1):
        if history[-1] <= config.tol:
            return x, report(True, it - 1, "converged")
        try:
            J = jac(x) if jac is not None else jacobian(F, x, fx, config.fd_step)
            dx, regularized = _direction(J, fx, config.tikhonov)
        except (np.linalg.LinAlgError, FiniteDifferenceError, ValueError) as exc:
            return x, report(False, it - 1, f"step computation failed: {exc}")
        phi0 = float(fx @ fx)
        slope = 2.0 * float(fx @ (J @ dx))
        t = 1.0
        for _ in range(config.max_backtracks + 1):
            x_new = x + t * dx
            try:
                f_new = np.asarray(F(x_new), dtype=float).ravel()
            except ValueError:
                f_new = np.full_like(fx, np.inf)
            if np.all(np.isfinite(f_new)) and f_new @ f_new <= phi0 + config.sufficient_decrease * t * slope:
                break
            t *= config.contraction
        else:
            msg = "line search failed"
            if regularized:
                msg += " after regularized step"
            return x, report(False, it - 1, msg)
        x, fx = x_new, f_new
        history.append(float(np.max(np.abs(fx))))
    converged = history[-1] <= config.tol
    return x, report(converged, config.max_iter, "converged" if converged else "maximum iterations reached")
