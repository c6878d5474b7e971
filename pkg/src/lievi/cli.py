"""Command-line front end.

Subcommands::

    lievi solve --config problem.json --output traj.csv --report report.json
    lievi integrate --config particle.json --output traj.csv
    lievi check STUDY --output report.json [--seed N]

Exit codes: 0 success, 1 configuration or usage error, 2 solver did not
converge or a study check failed (outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass

import numpy as np

from .control.newton import NewtonConfig
from .control.rigid_body import RigidBodyProblem, solve_rigid_body
from .control.rod import SCHEMES, CosseratRodProblem, solve_rod
from .lie import SO3, GroupMembershipError
from .mechanics import integrate_newton_law
from .retractions import RETRACTION_NAMES, RetractionDomainError
from .studies import STUDIES, polynomial_potential, run_study

log = logging.getLogger("lievi")

INPUT_MEMBERSHIP_TOL = 1e-6
_PROJECT_ABOVE = 1e-13
_MISSING = object()


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass(frozen=True)
class ProblemConfig:
    """A parsed configuration: the problem object plus solver settings."""

    kind: str
    problem: object
    newton: NewtonConfig


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _get(cfg, key, default=_MISSING, where=""):
    if not isinstance(cfg, dict):
        raise ConfigError(f"field '{where}' must be an object")
    if key not in cfg:
        if default is _MISSING:
            raise ConfigError(f"missing field '{where + key}'")
        return default
    return cfg[key]


def _array(value, shape, name):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' must be numeric") from exc
    if arr.size != int(np.prod(shape)):
        raise ConfigError(f"field '{name}' must have {int(np.prod(shape))} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"field '{name}' contains non-finite values")
    return arr.reshape(shape)


def _rotation(value, name):
    R = _array(value, (3, 3), name)
    defect = float(SO3.defect(R))
    if defect > INPUT_MEMBERSHIP_TOL:
        raise ConfigError(
            f"field '{name}' is not a rotation: group membership defect {defect:.3e} "
            f"exceeds {INPUT_MEMBERSHIP_TOL:.0e}"
        )
    if defect > _PROJECT_ABOVE:
        log.warning("field '%s' projected onto SO(3) (defect %.3e)", name, defect)
        R = SO3.project(R)
    return R


def _frame(value, name):
    flat = _array(value, (12,), name)
    g = np.eye(4)
    g[:3, :3] = _rotation(flat[:9], name)
    g[:3, 3] = flat[9:]
    return g


def _count(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"field '{name}' must be an integer")
    return int(value)


def _positive(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{name}' must be a number")
    if not value > 0:
        raise ConfigError(f"field '{name}' must be positive, got {value}")
    return float(value)


def _newton(cfg, tol=None, max_iter=None):
    block = _get(cfg, "newton", {}) or {}
    kwargs = {}
    if "tol" in block:
        kwargs["tol"] = _positive(block["tol"], "newton.tol")
    if "max_iter" in block:
        kwargs["max_iter"] = _count(block["max_iter"], "newton.max_iter")
    if tol is not None:
        kwargs["tol"] = tol
    if max_iter is not None:
        kwargs["max_iter"] = max_iter
    try:
        return NewtonConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"newton settings: {exc}") from exc


def parse_problem(cfg, retraction=None, tol=None, max_iter=None):
    """Turn a decoded JSON document into a :class:`ProblemConfig`.

    Raises
    ------
    ConfigError
        Naming the offending field or rule.
    """
    kind = _get(cfg, "problem")
    N = _count(_get(cfg, "N"), "N")
    if N < 4:
        raise ConfigError(f"field 'N' = {N} violates the rule N >= 4")
    h = _positive(_get(cfg, "h"), "h")
    ret = retraction or _get(cfg, "retraction", "cayley")
    if ret not in RETRACTION_NAMES:
        raise ConfigError(f"field 'retraction' = {ret!r}; expected one of {', '.join(RETRACTION_NAMES)}")
    bnd = _get(cfg, "boundary")
    try:
        if kind == "rigid-body":
            OmegaT = _get(bnd, "OmegaT", None, "boundary.")
            problem = RigidBodyProblem(
                rho=_array(_get(cfg, "rho"), (3,), "rho"),
                R0=_rotation(_get(bnd, "R0", where="boundary."), "boundary.R0"),
                RT=_rotation(_get(bnd, "RT", where="boundary."), "boundary.RT"),
                Omega0=_array(_get(bnd, "Omega0", where="boundary."), (3,), "boundary.Omega0"),
                N=N, h=h, retraction=ret,
                OmegaT=None if OmegaT is None else _array(OmegaT, (3,), "boundary.OmegaT"),
                strict=bool(_get(cfg, "strict", False)),
            )
        elif kind == "rod":
            scheme = _get(cfg, "scheme", "cayley-full")
            if scheme not in SCHEMES:
                raise ConfigError(f"field 'scheme' = {scheme!r}; expected one of {', '.join(SCHEMES)}")
            phiT = _get(bnd, "phiT", None, "boundary.")
            problem = CosseratRodProblem(
                K=_array(_get(cfg, "K"), (6, 6), "K"),
                phi_bar=_array(_get(cfg, "phi_bar"), (6,), "phi_bar"),
                rho1=float(_array(_get(cfg, "rho1"), (1,), "rho1")[0]),
                Phi0=_frame(_get(bnd, "Phi0", where="boundary."), "boundary.Phi0"),
                PhiT=_frame(_get(bnd, "PhiT", where="boundary."), "boundary.PhiT"),
                phi0=_array(_get(bnd, "phi0", where="boundary."), (6,), "boundary.phi0"),
                N=N, h=h, scheme=scheme, retraction=ret,
                phiT=None if phiT is None else _array(phiT, (6,), "boundary.phiT"),
            )
        else:
            raise ConfigError(f"field 'problem' = {kind!r}; expected 'rigid-body' or 'rod'")
    except (GroupMembershipError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return ProblemConfig(kind, problem, _newton(cfg, tol, max_iter))


# ---------------------------------------------------------------------------
# Trajectory files
# ---------------------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def trajectory_header(kind):
    rot = [f"R{i}{j}" for i in range(3) for j in range(3)]
    if kind == "rod":
        return (["k", "t"] + rot + ["r1", "r2", "r3"] + ["w1", "w2", "w3", "v1", "v2", "v3"]
                + ["f1", "f2", "f3", "l1", "l2", "l3"])
    return ["k", "t"] + rot + ["w1", "w2", "w3"] + ["u1", "u2", "u3"]


def write_trajectory(path, kind, trajectory, controls):
    """CSV with one row per ``k = 0..N``; algebra cells empty at ``N``, controls at ``N-1`` and ``N``."""
    pts = trajectory.points
    xis = trajectory.algebra
    N = len(pts) - 1
    h = trajectory.h
    n_alg = xis.shape[1]
    n_ctl = controls.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(kind))
        for k in range(N + 1):
            g = pts[k]
            row = [str(k), _fmt(k * h)] + [_fmt(x) for x in g[:3, :3].ravel()]
            if kind == "rod":
                row += [_fmt(x) for x in g[:3, 3]]
            row += [_fmt(x) for x in xis[k]] if k < N else [""] * n_alg
            row += [_fmt(x) for x in controls[k]] if k < len(controls) else [""] * n_ctl
            w.writerow(row)


def read_trajectory(path):
    """Parse a trajectory CSV back into arrays.

    Returns a dict with ``k``, ``t``, ``points`` (3x3 or 4x4 frames),
    ``algebra`` (rows ``0..N-1``) and ``controls`` (rows ``0..N-2``).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    kind = "rod" if "r1" in header else "rigid-body"
    col = {name: i for i, name in enumerate(header)}
    rot = [col[f"R{i}{j}"] for i in range(3) for j in range(3)]
    alg_names = ["w1", "w2", "w3"] + (["v1", "v2", "v3"] if kind == "rod" else [])
    ctl_names = ["f1", "f2", "f3", "l1", "l2", "l3"] if kind == "rod" else ["u1", "u2", "u3"]
    points, algebra, controls = [], [], []
    for r in body:
        R = np.array([float(r[i]) for i in rot]).reshape(3, 3)
        if kind == "rod":
            g = np.eye(4)
            g[:3, :3] = R
            g[:3, 3] = [float(r[col[c]]) for c in ("r1", "r2", "r3")]
            points.append(g)
        else:
            points.append(R)
        if r[col[alg_names[0]]] != "":
            algebra.append([float(r[col[c]]) for c in alg_names])
        if r[col[ctl_names[0]]] != "":
            controls.append([float(r[col[c]]) for c in ctl_names])
    return {
        "kind": kind,
        "k": np.array([int(r[0]) for r in body]),
        "t": np.array([float(r[1]) for r in body]),
        "points": np.array(points),
        "algebra": np.array(algebra),
        "controls": np.array(controls),
    }


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(config_path, output=None, report=None, retraction=None, tol=None, max_iter=None):
    try:
        pc = parse_problem(load_json(config_path), retraction, tol, max_iter)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    start = time.perf_counter()
    solver = solve_rigid_body if pc.kind == "rigid-body" else solve_rod
    try:
        traj, controls, cost, rep = solver(pc.problem, pc.newton)
    except RetractionDomainError as exc:
        log.error("solve failed: %s", exc)
        if report:
            _write_json(report, {"converged": False, "message": str(exc),
                                 "wall_time": time.perf_counter() - start})
        return 2
    data = {
        "problem": pc.kind,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "residual": rep.residual,
        "cost": cost,
        "terminal_errors": rep.terminal_error,
        "wall_time": time.perf_counter() - start,
        "residual_history": rep.history,
        "message": rep.message,
    }
    if output:
        write_trajectory(output, pc.kind, traj, controls)
    if report:
        _write_json(report, data)
    else:
        print(json.dumps(data, indent=2))
    if not rep.converged:
        log.warning("solver did not converge: %s (residual %.3e)", rep.message, rep.residual)
        return 2
    return 0


def parse_integrate(cfg):
    M = np.atleast_2d(np.asarray(_get(cfg, "M"), dtype=float))
    n = M.shape[0]
    if M.shape != (n, n):
        raise ConfigError("field 'M' must be a square matrix")
    if np.linalg.cond(M) > 1e12:
        raise ConfigError("field 'M' is singular")
    q0 = _array(_get(cfg, "q0"), (n,), "q0")
    q1 = _array(_get(cfg, "q1"), (n,), "q1")
    N = _count(_get(cfg, "N"), "N")
    if N < 1:
        raise ConfigError("field 'N' must be >= 1")
    h = _positive(_get(cfg, "h"), "h")
    coeffs = np.atleast_1d(np.asarray(_get(cfg, "V", [0.0]), dtype=float))
    return M, coeffs, q0, q1, N, h


def cmd_integrate(config_path, output=None):
    """Iterate the discrete Newton law ``M (q_{k+1} - 2 q_k + q_{k-1}) / h^2 = -grad V(q_k)``."""
    try:
        M, coeffs, q0, q1, N, h = parse_integrate(load_json(config_path))
    except (ConfigError, ValueError) as exc:
        log.error("config error: %s", exc)
        return 1
    _, grad_V = polynomial_potential(coeffs)
    q = integrate_newton_law(q0, q1, N, M, h, grad_V)
    header = ["k", "t"] + [f"q{i + 1}" for i in range(q.shape[1])]
    rows = [[str(k), _fmt(k * h)] + [_fmt(x) for x in q[k]] for k in range(N + 1)]
    if output:
        with open(output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
    return 0


def cmd_check(study, output=None, seed=0):
    if study not in STUDIES:
        log.error("unknown study %r; expected one of %s", study, ", ".join(STUDIES))
        return 1
    result = run_study(study, seed)
    if output:
        _write_json(output, result)
    else:
        print(json.dumps(result, indent=2))
    return 0 if result["passed"] else 2


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="lievi", description="Lie group variational integrators and optimal control.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("solve", help="solve a rigid-body or rod optimal-control problem")
    s.add_argument("--config", required=True)
    s.add_argument("--output")
    s.add_argument("--report")
    s.add_argument("--retraction", choices=RETRACTION_NAMES)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)
    i = sub.add_parser("integrate", help="integrate the discrete Newton law on R^n")
    i.add_argument("--config", required=True)
    i.add_argument("--output")
    c = sub.add_parser("check", help="run a validation study")
    c.add_argument("study")
    c.add_argument("--output")
    c.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        log.error("usage error: %s", exc)
        return 1
    if args.command == "solve":
        return cmd_solve(args.config, args.output, args.report, args.retraction, args.tol, args.max_iter)
    if args.command == "integrate":
        return cmd_integrate(args.config, args.output)
    return cmd_check(args.study, args.output, args.seed)


__all__ = ["main", "cmd_solve", "cmd_integrate", "cmd_check", "read_trajectory", "write_trajectory",
           "parse_problem", "ProblemConfig", "ConfigError"]
