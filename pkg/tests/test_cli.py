import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from contextlab.cli import encode, parse_n_list, read_config, run

SPECKER = {"n_vertices": 3, "edges": [[1, 2], [2, 3], [1, 3]]}
TABLE_ROWS = {
    3: (0.1793, 0.4566, 0.6981, 0.7320),
    4: (0.1557, 0.5029, 0.7369, 0.7653),
    10: (0.0944, 0.6569, 0.8601, 0.8740),
    200: (0.0085, 0.9213, 0.9914, 0.9922),
}


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def specker_file(tmp_path):
    path = tmp_path / "specker.json"
    path.write_text(json.dumps(SPECKER))
    return str(path)


class TestHelpers:
    def test_parse_n_list(self):
        assert parse_n_list("3..5,99") == [3, 4, 5, 99]

    def test_encode(self):
        from fractions import Fraction

        assert encode(Fraction(5, 6)) == {"value": 0.833333333333, "exact": "5/6"}
        assert encode(math.pi) == 3.14159265359
        assert encode([float("nan")]) == ["nan"]

    def test_read_config(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\nreport = noise\np1=7/9  # inline\n\n")
        assert read_config(str(p)) == {"report": "noise", "p1": "7/9"}


class TestCommands:
    def test_ks_vertices(self, capsys):
        code, out, _ = call(capsys, "ks", "--builtin", "cega18", "--report", "vertices")
        assert code == 0
        d = json.loads(out)
        assert d["count"] == 146 and len(d["vertices"]) == 146
        assert d["type_histogram"] == [24, 36, 36, 50]
        assert d["max_avg_predictability"]["exact"] == "5/6"

    def test_ks_noise_threshold(self, capsys):
        code, out, _ = call(capsys, "ks", "--builtin", "cega18", "--report", "noise", "--p1", "7/9")
        d = json.loads(out)
        assert code == 0 and d["A"]["exact"] == "5/6" and d["violated"] is False
        code, out, _ = call(capsys, "ks", "--builtin", "cega18", "--report", "noise", "--p1", "4/5")
        assert json.loads(out)["violated"] is True

    def test_qviol_table_csv(self, capsys):
        code, out, _ = call(capsys, "qviol-table", "--n", "3,4,10,200", "--format", "csv")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert list(rows[0]) == ["n", "q_viol", "optimal_eta0", "critical_eta0", "upper_eta0"]
        for row in rows:
            want = TABLE_ROWS[int(row["n"])]
            got = [float(row[k]) for k in ("q_viol", "optimal_eta0", "critical_eta0", "upper_eta0")]
            assert all(abs(a - b) <= 1e-3 for a, b in zip(got, want))

    def test_jm_realize_specker(self, capsys, specker_file):
        code, out, _ = call(capsys, "jm", "--hypergraph", specker_file, "--realize")
        d = json.loads(out)
        assert code == 0 and d["dim"] == 2 and d["reproduces_input"] is True
        assert d["blocks"][0]["eta"] == pytest.approx(1 / math.sqrt(2), abs=1e-11)
        assert d["minimal_incompatible_sets"] == [[1, 2, 3]]

    def test_realize(self, capsys, specker_file):
        code, out, _ = call(capsys, "realize", "--hypergraph", specker_file, "--format", "csv")
        assert code == 0 and out.splitlines()[0] == "vertices,offset,dim,eta"

    def test_jm_eta(self, capsys):
        code, out, _ = call(capsys, "jm", "--eta", "0.7", "--axis", "1,0,0", "--axis", "0,1,0")
        assert code == 0 and json.loads(out)["pairwise_compatible"] is True

    def test_specker_stats(self, capsys, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"p": [0.5, 0.5, 0.5], "w": [1, 1, 1]}))
        code, out, _ = call(capsys, "specker", "--stats", str(p))
        d = json.loads(out)
        assert code == 0 and d["joint_exists"] is False and d["ks_inequalities"]["R3 <= 2"] == 1

    def test_specker_bounds(self, capsys):
        code, out, _ = call(capsys, "specker", "--eta", "0.4566", "--report", "bounds")
        d = json.loads(out)
        assert d["lsw_bound"]["averaged"] == pytest.approx(1 - 0.4566 / 3)
        assert d["trine_cmax"] / 6 == pytest.approx(0.0896, abs=1e-4)

    def test_ncycle(self, capsys):
        code, out, _ = call(capsys, "ncycle", "--n", "3")
        d = json.loads(out)
        assert code == 0 and d["q_viol"] == pytest.approx(0.1793, abs=1e-4)

    def test_ncycle_curve(self, capsys):
        code, out, _ = call(capsys, "ncycle", "--n", "5", "--curve", "--steps", "10", "--format", "csv")
        assert code == 0 and len(out.splitlines()) == 12

    def test_chsh(self, capsys):
        code, out, _ = call(capsys, "chsh")
        assert code == 0 and json.loads(out)["chsh_value"] == pytest.approx(2 * math.sqrt(2), abs=1e-10)

    def test_fcf_models(self, capsys):
        code, out, _ = call(capsys, "fcf", "--model", "measurement_contextual")
        assert code == 0 and json.loads(out)["A_prime"]["exact"] == "9/10"

    def test_fcf_input_csv(self, capsys, tmp_path):
        from contextlab.gpt_fit import FcfQuantumConfig, synthesize_raw_data

        p = tmp_path / "raw.csv"
        p.write_text(synthesize_raw_data(FcfQuantumConfig(0.995, 0.995), seed=1).to_csv())
        code, out, _ = call(capsys, "fcf", "--input", str(p))
        d = json.loads(out)
        assert code == 0 and d["violated"] is True and d["C_P"]["value"] >= 0.99


class TestExitCodes:
    def test_domain_error(self, capsys):
        code, out, _ = call(capsys, "ncycle", "--n", "3", "--eta0", "0.95")
        assert code == 2
        assert json.loads(out)["type"] == "IncompatiblePair"

    def test_usage_errors(self, capsys):
        assert call(capsys, "ks", "--hypergraph", "/no/such/file")[0] == 1
        assert call(capsys, "nonsense")[0] == 1
        assert call(capsys, "ks", "--report", "nope")[0] == 1
        assert call(capsys, "jm")[0] == 1

    def test_missing_input_is_usage_error(self, capsys):
        assert call(capsys, "specker", "--eta", "0.5", "--report", "stats")[0] == 1

    def test_noise_report_csv(self, capsys):
        code, out, _ = call(capsys, "ks", "--builtin", "cega18", "--report", "noise", "--format", "csv")
        assert code == 0 and out.splitlines() == ["p1,p2,A,violated", "1/1,1/1,1/1,True"]

    def test_console_script(self, specker_file):
        ok = subprocess.run(["contextlab", "chsh"], capture_output=True, text=True)
        assert ok.returncode == 0
        bad = subprocess.run([sys.executable, "-m", "contextlab", "ncycle", "--n", "3", "--eta0", "0.99"],
                             capture_output=True, text=True)
        assert bad.returncode == 2 and json.loads(bad.stdout)["error"]
        usage = subprocess.run(["contextlab", "ks", "--bogus"], capture_output=True, text=True)
        assert usage.returncode == 1


class TestSelftests:
    @pytest.mark.parametrize("command", ["jm", "realize", "ks", "specker", "ncycle", "qviol-table", "fcf", "chsh"])
    def test_selftest_passes(self, capsys, command):
        code, out, _ = call(capsys, command, "--selftest")
        assert code == 0, out
        lines = out.strip().splitlines()
        assert all(l.startswith("PASS") for l in lines[:-1])
        assert "FAIL" not in out


class TestReproducibility:
    def test_byte_identical(self, capsys):
        args = ("fcf", "--synthetic", "--p1", "0.98", "--p2", "0.98", "--seed", "4")
        a = call(capsys, *args)[1]
        b = call(capsys, *args)[1]
        assert a == b and a

    def test_seed_changes_output(self, capsys):
        a = call(capsys, "fcf", "--synthetic", "--seed", "1")[1]
        b = call(capsys, "fcf", "--synthetic", "--seed", "2")[1]
        assert a != b

    def test_output_file_atomic(self, capsys, tmp_path):
        target = tmp_path / "out.json"
        code, out, _ = call(capsys, "chsh", "-o", str(target))
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["local_bound"] == 2
        assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
        stdout = call(capsys, "chsh")[1]
        assert target.read_text() == stdout


class TestConfig:
    def test_config_supplies_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("report=noise\np1=7/9\n")
        code, out, _ = call(capsys, "--config", str(cfg), "ks", "--builtin", "cega18")
        d = json.loads(out)
        assert code == 0 and d["p1"]["exact"] == "7/9"

    def test_flags_win(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("report=noise\np1=7/9\n")
        code, out, _ = call(capsys, "--config", str(cfg), "ks", "--builtin", "cega18", "--p1", "1/2")
        assert json.loads(out)["p1"]["exact"] == "1/2"

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour=blue\n")
        assert call(capsys, "--config", str(cfg), "chsh")[0] == 1

    def test_max_dim_env(self, monkeypatch, capsys, tmp_path):
        # the worked example needs a six-dimensional Hilbert space
        p = tmp_path / "h.json"
        p.write_text(json.dumps({"n_vertices": 4, "edges": [[1, 2], [1, 4], [2, 3], [2, 4], [3, 4]]}))
        assert call(capsys, "realize", "--hypergraph", str(p))[0] == 0
        monkeypatch.setenv("CONTEXTLAB_MAX_DIM", "4")
        code, out, _ = call(capsys, "realize", "--hypergraph", str(p))
        assert code == 2 and json.loads(out)["type"] == "ResourceLimit"
