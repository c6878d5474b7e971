"""Reconstruction, terminal constraint and discrete cost shared by both problems."""

from __future__ import annotations

import numpy as np

from ..lie import SO3
from ..mechanics import Trajectory
from ..retractions import RetractionDomainError, get_retraction


def _retraction(retraction, group):
    return get_retraction(retraction, group)


def reconstruct(g0, xis, retraction, h, group=SO3):
    """Rebuild ``g_0..g_N`` from ``g_{k+1} = g_k tau(h xi_k)``.

    Raises
    ------
    RetractionDomainError
        Naming the first step index at which ``tau`` is undefined.
    """
    ret = _retraction(retraction, group)
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    try:
        steps = ret.tau(h * xis)
    except RetractionDomainError as exc:
        for k, x in enumerate(xis):
            try:
                ret.tau(h * x)
            except RetractionDomainError:
                raise RetractionDomainError(f"step k={k}: {exc}") from exc
        raise
    g = np.asarray(g0, dtype=float)
    points = [g]
    for s in steps:
        g = group.mul(g, s)
        points.append(g)
    return Trajectory(np.array(points), h, group, xis)


def terminal_constraint(xis, g0, gT, retraction, h, group=SO3):
    """``tau^{-1}(tau(h xi_{N-1})^{-1} ... tau(h xi_0)^{-1} g0^{-1} gT)``.

    Vanishes exactly when the reconstructed end point equals ``gT``.
    """
    ret = _retraction(retraction, group)
    gN = reconstruct(g0, xis, ret, h, group).points[-1]
    try:
        return ret.tau_inv(group.mul(group.inv(gN), gT))
    except RetractionDomainError as exc:
        raise RetractionDomainError(f"terminal constraint: {exc}") from exc


def discrete_cost(ld, samples):
    """``sum_k l_d(xi_k, xi_{k+1})`` over every consecutive pair of samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("discrete cost needs at least two samples")
    return float(sum(ld(samples[k], samples[k + 1]) for k in range(samples.shape[0] - 1)))


def geodesic_guess(g0, gT, retraction, N, h, group=SO3):
    """Constant sample ``tau^{-1}(g0^{-1} gT) / (N h)``."""
    ret = _retraction(retraction, group)
    return ret.tau_inv(group.mul(group.inv(g0), gT)) / (N * h)
