import csv
import json
import subprocess
import sys

import numpy as np
from numpy.testing import assert_allclose

from lievi.cli import main, read_trajectory, write_trajectory
from lievi.control.reconstruction import reconstruct
from lievi.lie import SE3, SO3
from lievi.mechanics import Trajectory


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def rigid_config(rng, N=8, h=0.1, rho=(0.0, 0.0, 0.0), omega=(0.4, -0.2, 0.7)):
    R0 = SO3.random(rng)
    RT = reconstruct(R0, np.tile(omega, (N, 1)), "cayley", h).points[-1]
    return {
        "problem": "rigid-body",
        "rho": list(rho),
        "boundary": {"R0": R0.ravel().tolist(), "RT": RT.ravel().tolist(), "Omega0": list(omega)},
        "N": N,
        "h": h,
        "retraction": "cayley",
        "newton": {"tol": 1e-10, "max_iter": 50},
    }


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


class TestSolve:
    def test_forward_consistent(self, rng, tmp_path):
        cfg = write(tmp_path, "c.json", rigid_config(rng))
        out, rep = tmp_path / "t.csv", tmp_path / "r.json"
        assert main(["solve", "--config", cfg, "--output", str(out), "--report", str(rep)]) == 0
        report = json.loads(rep.read_text())
        assert report["converged"]
        assert abs(report["cost"]) <= 1e-12
        assert {"iterations", "residual", "terminal_errors", "wall_time"} <= set(report)
        traj = read_trajectory(out)
        assert traj["points"].shape == (9, 3, 3)
        assert traj["controls"].shape == (7, 3)
        assert traj["algebra"].shape == (8, 3)
        assert_allclose(traj["t"], 0.1 * np.arange(9))

    def test_N_too_small(self, rng, tmp_path, caplog):
        c = rigid_config(rng)
        c["N"] = 2
        assert main(["solve", "--config", write(tmp_path, "c.json", c)]) == 1
        assert "N >= 4" in caplog.text

    def test_tampered_rotation(self, rng, tmp_path, caplog):
        c = rigid_config(rng)
        RT = np.array(c["boundary"]["RT"])
        RT[0] += 1e-2
        c["boundary"]["RT"] = RT.tolist()
        assert main(["solve", "--config", write(tmp_path, "c.json", c)]) == 1
        assert "RT" in caplog.text

    def test_non_convergence_exit_2(self, rng, tmp_path):
        c = rigid_config(rng, rho=(1.0, -1.0, 0.5), omega=(1.0, 2.0, -1.0))
        c["newton"]["max_iter"] = 1
        out, rep = tmp_path / "t.csv", tmp_path / "r.json"
        code = main(["solve", "--config", write(tmp_path, "c.json", c), "--output", str(out), "--report", str(rep)])
        assert code == 2
        assert out.exists() and not json.loads(rep.read_text())["converged"]

    def test_malformed_json(self, tmp_path, caplog):
        path = tmp_path / "c.json"
        path.write_text('{"problem": "rigid-body",\n "N": }')
        assert main(["solve", "--config", str(path)]) == 1
        assert "line 2" in caplog.text

    def test_missing_field(self, rng, tmp_path, caplog):
        c = rigid_config(rng)
        del c["rho"]
        assert main(["solve", "--config", write(tmp_path, "c.json", c)]) == 1
        assert "rho" in caplog.text

    def test_retraction_override(self, rng, tmp_path):
        cfg = write(tmp_path, "c.json", rigid_config(rng, rho=(1.0, -1.0, 0.5)))
        rep = tmp_path / "r.json"
        assert main(["solve", "--config", cfg, "--report", str(rep), "--retraction", "exp2", "--max-iter", "50"]) == 0

    def test_rod(self, rng, tmp_path):
        N, h = 8, 0.125
        phi = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        c = {
            "problem": "rod",
            "K": np.diag([2, 2, 2, 1, 1, 1.0]).tolist(),
            "phi_bar": phi,
            "rho1": 1.0,
            "boundary": {
                "Phi0": np.eye(3).ravel().tolist() + [0, 0, 0],
                "PhiT": np.eye(3).ravel().tolist() + [0, 0, N * h],
                "phi0": phi,
            },
            "N": N,
            "h": h,
            "scheme": "direct-truncated",
        }
        out = tmp_path / "t.csv"
        assert main(["solve", "--config", write(tmp_path, "c.json", c), "--output", str(out),
                     "--report", str(tmp_path / "r.json")]) == 0
        traj = read_trajectory(out)
        assert traj["kind"] == "rod"
        assert_allclose(traj["points"][-1][:3, 3], [0, 0, 1], atol=1e-10)


class TestTrajectoryFile:
    def test_round_trip_rigid(self, rng, tmp_path):
        h = 0.1
        pts = SO3.random(rng, size=6)
        traj = Trajectory(pts, h, SO3, rng.normal(size=(5, 3)))
        controls = rng.normal(size=(4, 3))
        path = tmp_path / "t.csv"
        write_trajectory(path, "rigid-body", traj, controls)
        back = read_trajectory(path)
        assert np.max(np.abs(back["points"] - pts)) <= 1e-15
        assert np.array_equal(back["algebra"], traj.algebra)
        assert np.array_equal(back["controls"], controls)
        assert np.array_equal(back["t"], h * np.arange(6))

    def test_round_trip_rod(self, rng, tmp_path):
        pts = SE3.random(rng, size=5)
        traj = Trajectory(pts, 0.2, SE3, rng.normal(size=(4, 6)))
        path = tmp_path / "t.csv"
        write_trajectory(path, "rod", traj, rng.normal(size=(3, 6)))
        back = read_trajectory(path)
        assert np.max(np.abs(back["points"] - pts)) <= 1e-15
        header = path.read_text().splitlines()[0].split(",")
        assert header[:2] == ["k", "t"]
        assert header[-6:] == ["f1", "f2", "f3", "l1", "l2", "l3"]
        last = path.read_text().splitlines()[-1].split(",")
        assert last[-1] == "" and last[-7] == ""


class TestIntegrate:
    def run(self, tmp_path, cfg):
        out = tmp_path / "q.csv"
        assert main(["integrate", "--config", write(tmp_path, "i.json", cfg), "--output", str(out)]) == 0
        return read_csv(out)

    def test_uniform_motion(self, tmp_path):
        header, data = self.run(tmp_path, {"M": np.eye(3).tolist(), "V": [0.0], "q0": [0, 0, 0],
                                           "q1": [0.1, 0, 0], "N": 20, "h": 0.1})
        assert header == ["k", "t", "q1", "q2", "q3"]
        assert_allclose(data[:, 2], 0.1 * np.arange(21), atol=1e-14)
        assert_allclose(data[:, 3:], 0)

    def test_zero_data(self, tmp_path):
        _, data = self.run(tmp_path, {"M": np.eye(2).tolist(), "V": [0.0, 0.0, 0.5], "q0": [0, 0],
                                      "q1": [0, 0], "N": 10, "h": 0.1})
        assert np.all(data[:, 2:] == 0)

    def test_harmonic_energy_bounded(self, tmp_path):
        h, N = 0.1, 10_000
        _, data = self.run(tmp_path, {"M": [[1.0]], "V": [0.0, 0.0, 0.5], "q0": [1.0],
                                      "q1": [np.cos(h)], "N": N, "h": h})
        q = data[:, 2]
        v = np.diff(q) / h
        mid = 0.5 * (q[1:] + q[:-1])
        energy = 0.5 * v ** 2 + 0.5 * mid ** 2
        amplitude = np.max(energy) - np.min(energy)
        drift = abs(np.mean(energy[-1000:]) - np.mean(energy[:1000]))
        assert drift <= 0.01 * max(amplitude, 1e-12) + 1e-12
        assert np.max(np.abs(q)) < 1.01

    def test_singular_mass(self, tmp_path):
        cfg = {"M": [[1.0, 0.0], [0.0, 0.0]], "q0": [0, 0], "q1": [0, 0], "N": 3, "h": 0.1}
        assert main(["integrate", "--config", write(tmp_path, "i.json", cfg)]) == 1


class TestCheck:
    def test_retraction_identities(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["check", "retraction-identities", "--output", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["passed"] and all(c["passed"] for c in report["checks"])

    def test_dep2_consistency(self, tmp_path):
        out = tmp_path / "r.json"
        assert main(["check", "dep2-consistency", "--output", str(out), "--seed", "3"]) == 0
        (check,) = json.loads(out.read_text())["checks"]
        assert check["value"] >= 0.8

    def test_unknown_study(self):
        assert main(["check", "nonsense"]) == 1

    def test_bad_usage(self):
        assert main(["frobnicate"]) == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "lievi", "check", "nonsense"], capture_output=True)
        assert proc.returncode == 1
