"""End-to-end checks of the command line surface."""

import json
import math

import numpy as np
import pytest

from bethezeta import cli


@pytest.fixture()
def c3_file(tmp_path):
    path = tmp_path / "c3.json"
    path.write_text(
        json.dumps(
            {"schema_version": 1,
             "generator": {"type": "cycle", "n": 3, "J": 0.5}}
        )
    )
    return str(path)


@pytest.fixture()
def tree_file(tmp_path):
    path = tmp_path / "tree.json"
    path.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "variables": [
                    {"id": "a", "kind": "binary"},
                    {"id": "b", "kind": "binary"},
                ],
                "factors": [
                    {"id": "ab", "members": ["a", "b"],
                     "theta": {"prod(a:x,b:x)": 0.7, "a:x": 0.3}}
                ],
            }
        )
    )
    return str(path)


@pytest.fixture()
def torus_file(tmp_path):
    path = tmp_path / "torus.json"
    path.write_text(
        json.dumps(
            {"schema_version": 1,
             "generator": {"type": "torus", "rows": 3, "cols": 3,
                           "J": 1.0}}
        )
    )
    return str(path)


class TestLbpRun:
    def test_tree_beliefs_match_enumeration(self, tree_file, tmp_path, capsys):
        out = tmp_path / "run.json"
        code = cli.main(["lbp-run", tree_file, "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["converged"]
        # two-variable enumeration: p(a,b) ~ exp(0.7ab + 0.3a)
        states = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        w = np.array([math.exp(0.7 * a * b + 0.3 * a) for a, b in states])
        w /= w.sum()
        ea = sum(wk * a for wk, (a, _) in zip(w, states))
        eb = sum(wk * b for wk, (_, b) in zip(w, states))
        assert doc["beliefs"]["vertices"]["a"][0] == pytest.approx(ea)
        assert doc["beliefs"]["vertices"]["b"][0] == pytest.approx(eb)
        assert doc["stationarity_residual"] < 1e-6
        assert doc["stability"]["locally_stable"]

    def test_missing_file_is_input_error(self, capsys):
        assert cli.main(["lbp-run", "/nonexistent.json"]) == cli.EXIT_INPUT

    def test_bad_json_is_input_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert cli.main(["lbp-run", str(bad)]) == cli.EXIT_INPUT


class TestVerify:
    @pytest.mark.parametrize(
        "which,samples",
        [("bethe-zeta", 20), ("ihara-bass", 20), ("linearization", 3),
         ("stationarity", 3)],
    )
    def test_identities_pass(self, c3_file, which, samples, capsys):
        code = cli.main(
            ["verify", c3_file, "--which", which,
             "--samples", str(samples), "--seed", "1"]
        )
        captured = capsys.readouterr()
        assert code == 0
        last = captured.out.strip().splitlines()[-1]
        assert last.startswith("max,")


class TestZetaInfo:
    def test_cycle_report(self, c3_file, capsys):
        code = cli.main(["zeta-info", c3_file, "--u", "0.5"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["prime_cycles_by_length"] == {"3": 2}
        assert doc["zeta_determinant"] == pytest.approx(1.3061224489795917)
        assert doc["zeta_euler_truncated"] == pytest.approx(
            doc["zeta_determinant"]
        )
        assert doc["pf_bounds"] == [1, 1]

    def test_pole_reported(self, c3_file, capsys):
        code = cli.main(["zeta-info", c3_file, "--u", "1.0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert "zeta_determinant_error" in doc


class TestExperiments:
    def test_wn_csv_and_figure(self, tmp_path):
        out = tmp_path / "wn.csv"
        code = cli.main(
            ["experiment-wn", "--kmin", "-0.5", "--kmax", "0.5",
             "--steps", "3", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "K,W,N,w_ok"
        assert len(lines) == 4
        assert (tmp_path / "wn.png").exists()

    def test_wn_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            cli.main(
                ["experiment-wn", "--kmin", "0", "--kmax", "1",
                 "--steps", "2", "--out", str(path), "--no-plot"]
            )
        assert a.read_bytes() == b.read_bytes()

    def test_grid_small(self, tmp_path):
        out = tmp_path / "grid.csv"
        code = cli.main(
            ["experiment-grid", "--kmin", "-0.2", "--kmax", "0.2",
             "--jmin", "-0.2", "--jmax", "0.2", "--steps", "3",
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == (
            "K,J,converged,rho_W,rho_N,certified_W,certified_N"
        )
        assert len(lines) == 10
        assert (tmp_path / "grid.png").exists()
        # independent model at the origin: both radii vanish
        origin = [l for l in lines[1:] if l.startswith("0,0,")]
        assert origin, lines
        fields = origin[0].split(",")
        assert fields[2] == "true"
        assert abs(float(fields[3])) < 1e-12
        assert abs(float(fields[4])) < 1e-12

    def test_trajectory(self, torus_file, tmp_path):
        out = tmp_path / "traj.csv"
        code = cli.main(
            ["experiment-trajectory", torus_file, "--tmax", "0.4",
             "--steps", "21", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("t,rho_Tprime,min_eig_restricted")
        assert (tmp_path / "traj.png").exists()
        onsets = [l for l in lines[1:] if l.split(",")[4] == "true"]
        assert len(onsets) == 1


class TestThreadCap:
    def test_env_var_caps_workers(self, monkeypatch):
        from bethezeta import experiments

        monkeypatch.setenv("BETHE_ZETA_THREADS", "1")
        assert experiments.worker_count() == 1
        monkeypatch.setenv("BETHE_ZETA_THREADS", "3")
        assert experiments.worker_count() == 3
