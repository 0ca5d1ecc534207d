import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gamelab.cli import main
from gamelab.potential import random_potential_game


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


class TestRunCommand:
    def test_zero_sum_smoke(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "nfg_run", "game": "zero_sum_1",
            "learners": {"algorithm": "omd", "eta": 0.25}, "T": 200, "seed": 0,
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        for name in ("runlog.csv", "metrics.csv", "report.json"):
            assert (out / name).exists()
        report = read_report(out)
        assert all(c["pass"] for c in report["checks"])

    def test_runlog_schema(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "nfg_run", "game": "zero_sum_1",
            "learners": {"algorithm": "omd", "eta": 0.25}, "T": 5, "seed": 0,
        })
        out = tmp_path / "out"
        main(["run", "--config", cfg, "--out", str(out)])
        with open(out / "runlog.csv") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        assert header == ["iter", "player", "x0", "x1", "x2", "u0", "u1", "u2",
                          "regret", "path_sq_l1", "nash_gap", "welfare"]
        assert len(rows) == 1 + 6 * 2  # (T+1) iters x 2 players
        body = np.array(rows[1:], dtype=float)
        assert body[:, 0].max() == 5
        # probabilities sum to one at 17-digit precision
        assert np.abs(body[:, 2:5].sum(axis=1) - 1.0).max() < 1e-12

    def test_deterministic_byte_identical(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "nfg_run", "game": "zero_sum_2",
            "learners": {"algorithm": "oftrl", "eta": 0.1,
                         "prediction": {"kind": "h_step", "window": 5}},
            "T": 100, "seed": 11, "random_init": True,
        })
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", cfg, "--out", str(out1)])
        main(["run", "--config", cfg, "--out", str(out2)])
        assert (out1 / "runlog.csv").read_bytes() == (out2 / "runlog.csv").read_bytes()
        assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()

    def test_bad_config_exits_one(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {"kind": "mystery"})
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_unknown_game_exits_one(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "nfg_run", "game": "not_a_game",
            "learners": {"algorithm": "omd", "eta": 0.1}, "T": 5,
        })
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_robustness_divergence_exits_three(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "continuous_run", "game": "robustness", "eta": 0.5,
            "T": 4000, "seed": 0,
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 3
        report = read_report(out)
        assert report["verdict"] == "diverge"
        assert report["diverged"]

    def test_potential_certificate_violation_exits_two(self, tmp_path):
        rng = np.random.default_rng(4)
        pgame = random_potential_game(rng, n_players=2, max_actions=3, weighted=False)
        game_payload = pgame.game.to_json_dict()
        game_payload["phi_table"] = pgame.phi.tolist()
        game_payload["weights"] = pgame.weights.tolist()
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "potential_run", "game": game_payload,
            "T": 150, "eta": 20.0 * pgame.md_eta,  # overriding eta voids the certificate
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 2

    def test_potential_run_at_certified_eta(self, tmp_path):
        rng = np.random.default_rng(5)
        pgame = random_potential_game(rng, n_players=2, max_actions=3)
        game_payload = pgame.game.to_json_dict()
        game_payload["phi_table"] = pgame.phi.tolist()
        game_payload["weights"] = pgame.weights.tolist()
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "potential_run", "game": game_payload, "T": 200,
            "regularizers": ["euclidean", "negative_entropy"],
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        report = read_report(out)
        assert all(c["pass"] for c in report["checks"])

    def test_fisher_run(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "fisher_run",
            "game": {"utilities": [[2.0, 1.0], [1.0, 3.0]], "budgets": [1.0, 1.0]},
            "T": 500,
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        report = read_report(out)
        assert report["final_residual"] < 1e-3

    def test_bspp_kuhn_run(self, tmp_path):
        cfg = write_json(tmp_path / "exp.json", {"kind": "bspp_run", "game": "kuhn", "T": 300})
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "gap.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "last_gap", "avg_gap"]
        assert len(rows) == 302

    def test_bspp_treeplex_file(self, tmp_path):
        from gamelab.bspp import build_kuhn

        kuhn = build_kuhn()
        payload = {
            "A": kuhn.A.tolist(),
            "domain": "treeplex",
            "treeplex_x": kuhn.domain_x.tp.to_json_dict(),
            "treeplex_y": kuhn.domain_y.tp.to_json_dict(),
        }
        cfg = write_json(tmp_path / "exp.json", {
            "kind": "bspp_run", "game": write_json(tmp_path / "kuhn.json", payload), "T": 50,
        })
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        report = read_report(out)
        assert report["checks"][0]["pass"]

    def test_suite_directory(self, tmp_path, monkeypatch):
        suite = tmp_path / "suite"
        suite.mkdir()
        for j in (1, 2):
            write_json(suite / f"exp{j}.json", {
                "kind": "nfg_run", "game": f"zero_sum_{j}",
                "learners": {"algorithm": "omd", "eta": 0.25}, "T": 50, "seed": 0,
            })
        monkeypatch.setenv("GAMELAB_WORKERS", "2")
        out = tmp_path / "out"
        assert main(["run", "--config", str(suite), "--out", str(out)]) == 0
        assert (out / "exp1" / "runlog.csv").exists()
        assert (out / "exp2" / "runlog.csv").exists()


class TestVerifyCommand:
    def test_szs_builtin_passes(self, capsys):
        assert main(["verify", "--game", "szs_1", "--class", "strategically_zero_sum"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["pass"] and out["scale"] == pytest.approx(0.5)

    def test_zero_sum_constant(self, capsys):
        assert main(["verify", "--game", "zero_sum_1", "--class", "constant_sum"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["pass"] and out["c"] == pytest.approx(0.0)

    def test_perturbed_game_fails_with_witness(self, tmp_path, capsys):
        a = np.array([[0.5, -0.5], [0.0, 0.25]])
        b = -a.copy()
        b[0, 1] += 0.2
        game_file = write_json(tmp_path / "game.json", {
            "players": 2, "action_counts": [2, 2],
            "utilities": [a.tolist(), b.tolist()], "orientation": "maximize",
        })
        assert main(["verify", "--game", game_file, "--class", "constant_sum"]) == 2
        out = json.loads(capsys.readouterr().out)
        assert not out["pass"]
        assert out["witness"] == [0, 1]

    def test_polymatrix_file(self, tmp_path, capsys):
        from gamelab.game_classes import random_zero_sum_polymatrix

        pg = random_zero_sum_polymatrix(3, 2, np.random.default_rng(0))
        game_file = write_json(tmp_path / "pg.json", pg.to_json_dict())
        assert main(["verify", "--game", game_file, "--class", "polymatrix_zero_sum"]) == 0

    def test_weighted_potential_class(self, tmp_path, capsys):
        rng = np.random.default_rng(9)
        pgame = random_potential_game(rng, n_players=2, max_actions=3)
        payload = pgame.game.to_json_dict()
        payload["phi_table"] = pgame.phi.tolist()
        payload["weights"] = pgame.weights.tolist()
        f = write_json(tmp_path / "pg.json", payload)
        assert main(["verify", "--game", f, "--class", "weighted_potential"]) == 0
        payload["phi_table"][0][0] += 0.2
        f2 = write_json(tmp_path / "pg2.json", payload)
        assert main(["verify", "--game", f2, "--class", "weighted_potential"]) == 2
        out = capsys.readouterr().out

    def test_unknown_class_rejected(self, capsys):
        with pytest.raises(SystemExit):
            main(["verify", "--game", "szs_1", "--class", "bogus"])


class TestAnalyzeCommand:
    def test_inefficiency_matrices(self, tmp_path, capsys):
        np.savetxt(tmp_path / "a.csv", [[1.0, -2.0], [-1.0, 1.0]], delimiter=",")
        np.savetxt(tmp_path / "b.csv", [[1.0, 1.0], [1.0, -1.0]], delimiter=",")
        assert main(["analyze", "--a", str(tmp_path / "a.csv"),
                     "--b", str(tmp_path / "b.csv"), "--eta", "0.2"]) == 0
        out = json.loads(capsys.readouterr().out)
        eigs = sorted(ev[0] for ev in out["eigenvalues"])
        assert eigs == pytest.approx([-2.0, -1.0], abs=1e-9)
        assert out["verdict"] == "converge"

    def test_robustness_matrices(self, tmp_path, capsys):
        np.savetxt(tmp_path / "a.csv", [[1.0, 0.0], [0.0, 0.025]], delimiter=",")
        np.savetxt(tmp_path / "b.csv", [[-1.0, 0.0], [0.0, 0.025]], delimiter=",")
        main(["analyze", "--a", str(tmp_path / "a.csv"),
              "--b", str(tmp_path / "b.csv"), "--eta", "0.2"])
        out = json.loads(capsys.readouterr().out)
        assert out["verdict"] == "diverge"

    def test_random_positive_definite_interaction_diverges(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        a = np.eye(2)
        b = rng.uniform(0.5, 1.5) * np.eye(2)  # A^T B positive definite
        np.savetxt(tmp_path / "a.csv", a, delimiter=",")
        np.savetxt(tmp_path / "b.csv", b, delimiter=",")
        main(["analyze", "--a", str(tmp_path / "a.csv"),
              "--b", str(tmp_path / "b.csv"), "--eta", "0.1"])
        out = json.loads(capsys.readouterr().out)
        assert out["verdict"] == "diverge"

    def test_nonsquare_rejected(self, tmp_path):
        np.savetxt(tmp_path / "a.csv", np.ones((2, 3)), delimiter=",")
        np.savetxt(tmp_path / "b.csv", np.ones((2, 3)), delimiter=",")
        assert main(["analyze", "--a", str(tmp_path / "a.csv"),
                     "--b", str(tmp_path / "b.csv"), "--eta", "0.1"]) == 1


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "gamelab.cli", "verify",
                           "--game", "zero_sum_1", "--class", "constant_sum"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"]
