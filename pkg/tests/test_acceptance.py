"""Acceptance gate: the twelve criteria at their stated tolerances.

Each test records one PASS/FAIL line (shown with ``-s`` and in the terminal
summary) and then asserts it.
"""

import json
import time

import numpy as np
import pytest

from lievi.cli import main, read_trajectory
from lievi.control.newton import NewtonConfig
from lievi.control.reconstruction import reconstruct
from lievi.control.rigid_body import (
    RigidBodyProblem,
    assemble_rigid_residual,
    rigid_cost,
    solve_rigid_body,
)
from lievi.control.rod import SCHEMES, CosseratRodProblem, rod_residual, solve_rod
from lievi.lie import SE3, SO3
from lievi.mechanics import (
    ReducedDiscreteLagrangian,
    del2_group_residual,
    del_residual,
    dep2_algebra_residual,
    dep2_group_residual,
    depk_residual,
    newton_law_lagrangian,
)
from lievi.retractions import Cayley
from lievi.studies import (
    dep2_consistency,
    momentum_study,
    polynomial_potential,
    rod_scheme_comparison,
    tangent_fd_errors,
    el_ep_equivalence,
)
from lievi.validation import convergence_order, group_defect
from oracles import increments, perturb_fd, rel_err, rigid_cost_oracle, rod_cost_oracle

RHO = np.array([1.0, -1.0, 0.5])
K_DIAG = np.diag([2.0, 2.0, 2.0, 1.0, 1.0, 1.0])
STRAIGHT = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])


def rigid_forward(seed, N=16, h=0.1, scale=0.05, rho=RHO):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, 3)
    Om = c + scale * rng.normal(size=(N, 3))
    R0 = SO3.random(rng)
    RT = reconstruct(R0, Om, "cayley", h).points[-1]
    return RigidBodyProblem(rho, R0, RT, Om[0], N, h)


def rod_forward(rng, scheme, N, h=0.1, scale=0.05, K=K_DIAG, phi_bar=STRAIGHT, base=None):
    base = np.array([0.2, -0.1, 0.3, 0.0, 0.0, 1.0]) if base is None else base
    phis = base + scale * rng.normal(size=(N, 6))
    Phi0 = SE3.random(rng)
    probe = CosseratRodProblem(K, phi_bar, 0.7, Phi0, Phi0, phis[0], N, h, scheme)
    PhiT = reconstruct(Phi0, phis, probe.step_map, h, SE3).points[-1]
    return CosseratRodProblem(K, phi_bar, 0.7, Phi0, PhiT, phis[0], N, h, scheme), phis


def test_criterion_01_retraction_identities(criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    w = rng.normal(size=(1000, 3))
    w *= (10 * rng.uniform(0, 1, 1000) / np.linalg.norm(w, axis=1))[:, None]
    cay = Cayley(SO3)
    R = cay.tau(w)
    eye = np.eye(3)
    errs = {
        "orthogonality": np.max(np.abs(np.swapaxes(R, 1, 2) @ R - eye)),
        "det": np.max(np.abs(np.linalg.det(R) - 1)),
        "inverse pair": np.max(np.abs(R @ cay.tau(-w) - eye)),
        "dcay dcay^-1": np.max(np.abs(cay.dtau_matrix(w) @ cay.dtau_inv_matrix(w) - eye)),
    }
    roundtrip = np.max(np.abs(cay.tau_inv(R) - w))
    elapsed = time.perf_counter() - start
    passed = max(errs.values()) <= 1e-12 and roundtrip <= 1e-10 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    criterion(1, "retraction identities", passed, f"{detail}, round trip {roundtrip:.1e}, {elapsed:.2f} s")
    assert passed


def test_criterion_02_tangent_fd_slope(criterion):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    eps = 0.1 / 2 ** np.arange(5)
    slopes = {}
    for group in (SO3, SE3):
        xi, eta = rng.normal(size=(2, group.dim))
        slopes[group.name] = convergence_order(eps, tangent_fd_errors(Cayley(group), xi, eta, eps)).slope
    elapsed = time.perf_counter() - start
    passed = min(slopes.values()) >= 1.9 and elapsed < 1.0
    criterion(2, "right-trivialized tangent FD slope", passed,
              ", ".join(f"{k} {v:.3f}" for k, v in slopes.items()) + f" (>= 1.9), {elapsed:.2f} s")
    assert passed


def test_criterion_03_newton_law(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        A = rng.normal(size=(3, 3))
        M = A @ A.T + 3 * np.eye(3)
        h = rng.uniform(0.01, 0.2)
        V, grad_V = polynomial_potential(rng.normal(size=4))
        q = rng.normal(size=(3, 3))
        r = del_residual(newton_law_lagrangian(M, h, V, grad_V), q, 1)
        newton = M @ (q[2] - 2 * q[1] + q[0]) / h ** 2 + grad_V(q[1])
        worst = max(worst, np.max(np.abs(-r / h - newton)) / max(1.0, np.max(np.abs(newton))))
    passed = worst <= 1e-12
    criterion(3, "discrete EL = discrete Newton law", passed, f"max rel err {worst:.1e} (<= 1e-12)")
    assert passed


def test_criterion_04_momentum(criterion):
    (check,) = momentum_study(np.random.default_rng(4), steps=1000)
    criterion(4, "momentum map drift over 1000 steps", check.passed, f"{check.value:.1e} (<= 1e-10)")
    assert check.passed


def test_criterion_05_el_ep_equivalence(criterion):
    (check,) = el_ep_equivalence(np.random.default_rng(5), n_seeds=50)
    criterion(5, "discrete EL <=> discrete EP cross residual", check.passed, f"{check.value:.1e} (<= 1e-9)")
    assert check.passed


def _features(group, rng):
    """Random linear coordinates ``P vec(g - I)``: a cheap smooth chart near the identity."""
    n = group.n
    rows = n - 1 if group is SE3 else n
    P = rng.normal(size=(group.dim, rows * n))
    return lambda g: P @ (np.asarray(g) - np.eye(n))[:rows].ravel()


def _smooth_pair(group, rng):
    A = rng.normal(size=(group.dim, group.dim))
    chart = _features(group, rng)

    def l(a, b):
        x, y = chart(a), chart(b)
        return float(np.sum(np.sin(x @ A)) + (x @ y) ** 2 + np.sum(y ** 3))

    return l


def _oracle_dep2_algebra(rng, group):
    h, ret = 0.1, Cayley(group)
    A = rng.normal(size=(group.dim, group.dim))
    ld = ReducedDiscreteLagrangian(lambda a, b: float(np.sum(np.sin(a @ A)) + (a @ b) ** 2 + np.sum(b ** 3)))
    gs = list(group.random(rng, 0.3, size=7))

    def om(gs):
        return [ret.tau_inv(w) / h for w in increments(group, gs)]

    def S(gs):
        o = om(gs)
        return sum(ld(a, b) for a, b in zip(o[:-1], o[1:]))

    o = om(gs)
    return rel_err(dep2_algebra_residual(ld, ret, h, o[1:5]), h * perturb_fd(S, gs, 3, group))


def _oracle_dep2_group(rng, group):
    l = _smooth_pair(group, rng)
    gs = list(group.random(rng, 0.5, size=7))

    def S(gs):
        W = increments(group, gs)
        return sum(l(a, b) for a, b in zip(W[:-1], W[1:]))

    W = increments(group, gs)
    return rel_err(dep2_group_residual(l, W[1:5], group), perturb_fd(S, gs, 3, group))


def _oracle_del2(rng, group):
    l = _smooth_pair(group, rng)
    B = rng.normal(size=group.dim)
    chart = _features(group, rng)

    def L(g, a, b):
        return l(a, b) * (1 + 0.3 * np.sin(chart(g) @ B))

    gs = list(group.random(rng, 0.5, size=7))

    def S(gs):
        W = increments(group, gs)
        return sum(L(gs[j], W[j], W[j + 1]) for j in range(len(gs) - 2))

    W = increments(group, gs)
    return rel_err(del2_group_residual(L, gs[1:4], W[1:5], group), perturb_fd(S, gs, 3, group))


def _oracle_depk(rng, group, k):
    l2 = _smooth_pair(group, rng)
    B = rng.normal(size=group.dim)
    chart = _features(group, rng)
    if k == 1:
        def l(a):
            return l2(a, a)
    elif k == 2:
        l = l2
    else:
        def l(a, b, c):
            return l2(a, b) * (1 + 0.2 * np.cos(chart(c) @ B))
    gs = list(group.random(rng, 0.5, size=8))

    def S(gs):
        W = increments(group, gs)
        return sum(l(*W[j:j + k]) for j in range(len(W) - k + 1))

    i = 3
    W = increments(group, gs)
    return rel_err(depk_residual(l, W[i - k:i + k], k, group), perturb_fd(S, gs, i, group))


def _oracle_rigid(rng):
    p = rigid_forward(int(rng.integers(1 << 30)), N=7, scale=0.5)
    Om = np.concatenate([p.Omega0[None], np.zeros((p.N - 1, 3))])
    Om[1:] = p.Omega0 + 0.5 * rng.normal(size=(p.N - 1, 3))
    r = assemble_rigid_residual(p, Om[1:])[:-3].reshape(-1, 3)
    return max(rel_err(a, b) for a, b in zip(r, rigid_cost_oracle(p, Om)))


def _oracle_rod(rng, scheme):
    A = rng.normal(size=(6, 6))
    p, phis = rod_forward(rng, scheme, N=6, scale=0.3, K=A @ A.T + np.eye(6),
                          phi_bar=np.array([0.1, 0.0, 0.2, 0.0, 0.0, 1.0]), base=np.array([0.1, 0.0, 0.2, 0.0, 0.0, 1.0]))
    r = rod_residual(p, phis[1:])[:-6].reshape(-1, 6)
    return max(rel_err(a, b) for a, b in zip(r, rod_cost_oracle(p, phis)))


def test_criterion_06_master_oracle(criterion):
    rng = np.random.default_rng(6)
    groups = [SO3, SE3] * 10
    start = time.perf_counter()
    cases = {
        "dep2 algebra": lambda: [_oracle_dep2_algebra(rng, g) for g in groups],
        "dep2 group": lambda: [_oracle_dep2_group(rng, g) for g in groups],
        "del2 group": lambda: [_oracle_del2(rng, g) for g in groups],
        "depk k=1": lambda: [_oracle_depk(rng, g, 1) for g in groups],
        "depk k=2": lambda: [_oracle_depk(rng, g, 2) for g in groups],
        "depk k=3": lambda: [_oracle_depk(rng, g, 3) for g in groups],
        "rigid assembler": lambda: [_oracle_rigid(rng) for _ in range(20)],
        "rod cayley-full": lambda: [_oracle_rod(rng, "cayley-full") for _ in range(20)],
        "rod direct-truncated": lambda: [_oracle_rod(rng, "direct-truncated") for _ in range(20)],
    }
    worst = {name: max(run()) for name, run in cases.items()}
    elapsed = time.perf_counter() - start
    passed = max(worst.values()) <= 1e-6 and elapsed < 30.0
    criterion(6, "master variation oracle (20 instances each)", passed,
              f"worst rel err {max(worst.values()):.1e} ({max(worst, key=worst.get)}), {elapsed:.1f} s")
    assert passed, worst


def test_criterion_07_dep2_consistency(criterion):
    rep, (check,) = dep2_consistency(hs=(0.1, 0.05, 0.025, 0.0125))
    criterion(7, "discrete EP2 consistency slope on exact EP2 samples", check.passed,
              f"{rep.slope:.3f} (>= 0.8), local orders {np.round(rep.local_orders, 3).tolist()}")
    assert check.passed


def test_criterion_08_rigid_body_solves(criterion):
    ok, worst_time, worst_iter = 0, 0.0, 0
    failures = []
    for seed in range(100):
        p = rigid_forward(seed)
        start = time.perf_counter()
        sol = solve_rigid_body(p)
        worst_time = max(worst_time, time.perf_counter() - start)
        r = sol.report
        good = r.converged and r.residual <= 1e-8 and r.terminal_error["R_fro"] <= 1e-8 and r.iterations <= 50
        ok += good
        if good:
            worst_iter = max(worst_iter, r.iterations)
        else:
            failures.append(seed)
    passed = ok >= 95 and worst_time < 10.0
    criterion(8, "rigid-body solves N=16", passed,
              f"{ok}/100 seeds (>= 95), max iterations {worst_iter}, slowest {worst_time:.2f} s, failed {failures}")
    assert passed


def test_criterion_09_rod_solves(criterion):
    rng = np.random.default_rng(9)
    residuals, worst_time = {}, 0.0
    for scheme in SCHEMES:
        p, _ = rod_forward(rng, scheme, N=12)
        start = time.perf_counter()
        sol = solve_rod(p)
        worst_time = max(worst_time, time.perf_counter() - start)
        residuals[scheme] = sol.report.residual if sol.report.converged else np.inf
    rep, reports = rod_scheme_comparison(Ns=(8, 16, 32, 64), T=1.2)
    worst_time = max([worst_time] + [r.wall_time for _, _, r in reports])
    family_ok = all(r.converged and r.residual <= 1e-8 for _, _, r in reports)
    passed = max(residuals.values()) <= 1e-8 and family_ok and rep.slope >= 0.8 and worst_time < 30.0
    criterion(9, "rod solves N=12 and inter-scheme difference slope", passed,
              f"residuals {', '.join(f'{k} {v:.1e}' for k, v in residuals.items())}; "
              f"slope {rep.slope:.3f} (>= 0.8); slowest {worst_time:.2f} s")
    assert passed


def _feasible_candidate(problem, Omegas, rng, scale):
    cand = Omegas.copy()
    cand[1:-1] += scale * rng.normal(size=cand[1:-1].shape)
    ret = Cayley(SO3)
    R = reconstruct(problem.R0, cand[:-1], ret, problem.h).points[-1]
    cand[-1] = ret.tau_inv(R.T @ problem.RT) / problem.h
    return cand


def test_criterion_10_stationarity(criterion):
    rng = np.random.default_rng(10)
    trials, margins, ok = 5, [], True
    for trial in range(trials):
        p = rigid_forward(1000 + trial, N=12, scale=0.2)
        sol = solve_rigid_body(p)
        assert sol.report.converged
        Om = sol.trajectory.algebra
        best = rigid_cost(p, Om)
        cands = [_feasible_candidate(p, Om, rng, 0.01) for _ in range(100)]
        # the candidate must satisfy the terminal constraint to be feasible
        end = max(np.linalg.norm(reconstruct(p.R0, c, "cayley", p.h).points[-1] - p.RT) for c in cands)
        assert end <= 1e-10
        margin = min(rigid_cost(p, c) for c in cands) - best
        margins.append(margin)
        ok &= margin >= 0
    criterion(10, "optimal cost <= 100 feasible perturbed candidates", ok,
              f"{trials} trials, smallest cost margin {min(margins):.2e}")
    assert ok


def test_criterion_11_group_defect(criterion):
    rng = np.random.default_rng(11)
    traj = reconstruct(np.eye(3), rng.uniform(-1, 1, (10_000, 3)), "cayley", 0.1)
    defect = float(np.max(group_defect(traj)))
    passed = defect <= 1e-10
    criterion(11, "SO(3) defect after 10^4 Cayley steps", passed, f"{defect:.1e} (<= 1e-10)")
    assert passed


def test_criterion_12_cli_contract(criterion, tmp_path):
    rng = np.random.default_rng(12)
    N, h, omega = 8, 0.1, np.array([0.4, -0.2, 0.7])
    R0 = SO3.random(rng)
    RT = reconstruct(R0, np.tile(omega, (N, 1)), "cayley", h).points[-1]
    cfg = {
        "problem": "rigid-body", "rho": [0.0, 0.0, 0.0], "N": N, "h": h, "retraction": "cayley",
        "boundary": {"R0": R0.ravel().tolist(), "RT": RT.ravel().tolist(), "Omega0": omega.tolist()},
        "newton": {"tol": 1e-10, "max_iter": 50},
    }

    def run(config, name):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        out, rep = tmp_path / f"{name}.csv", tmp_path / f"{name}-report.json"
        return main(["solve", "--config", str(path), "--output", str(out), "--report", str(rep)]), out, rep

    code_ok, out, rep = run(cfg, "ok")
    cost = json.loads(rep.read_text())["cost"] if rep.exists() else np.inf
    short = json.loads(json.dumps(cfg))
    short["N"] = 2
    code_short, _, _ = run(short, "short")
    tampered = json.loads(json.dumps(cfg))
    bad = RT.copy()
    bad[0, 0] += 1e-2
    tampered["boundary"]["RT"] = bad.ravel().tolist()
    code_bad, _, _ = run(tampered, "tampered")
    traj = read_trajectory(out)
    expected = reconstruct(R0, np.tile(omega, (N, 1)), "cayley", h).points
    sol = solve_rigid_body(RigidBodyProblem(np.zeros(3), R0, RT, omega, N, h), NewtonConfig())
    roundtrip = float(np.max(np.abs(traj["points"] - sol.trajectory.points)))
    passed = (code_ok == 0 and abs(cost) <= 1e-12 and code_short == 1 and code_bad == 1 and roundtrip <= 1e-15)
    criterion(12, "CLI exit codes and trajectory round trip", passed,
              f"exit codes {code_ok}/{code_short}/{code_bad} (0/1/1), cost {cost:.1e}, "
              f"round trip {roundtrip:.1e}, frame error vs forward data {np.max(np.abs(traj['points'] - expected)):.1e}")
    assert passed


@pytest.fixture(autouse=True)
def _quiet_warnings(caplog):
    caplog.set_level("ERROR")
