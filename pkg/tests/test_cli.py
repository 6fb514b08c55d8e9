import hashlib
import json
import shutil
from pathlib import Path

import pytest

from aupatterns.analytics import fixture_path
from aupatterns.cli import main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = main(["gen-data", "--spec", "demo", "--seed", "3", "--out", str(out),
                 "--subjects", "6", "--frames", "24"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def run_config(tmp_path_factory, data_dir):
    cfg = {
        "seed": 5,
        "epochs": 1,
        "batch_size": 16,
        "min_count": 12,
        "annotations": str(data_dir / "annotations.csv"),
        "images": str(data_dir / "images.bin"),
    }
    path = tmp_path_factory.mktemp("cfg") / "run.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGenData:
    def test_outputs_and_manifest(self, data_dir):
        assert (data_dir / "annotations.csv").exists()
        assert (data_dir / "images.bin").exists()
        manifest = json.loads((data_dir / "cli_manifest.json").read_text())
        assert manifest["config"]["seed"] == 3
        assert manifest["annotations_sha256"]

    def test_deterministic(self, data_dir, tmp_path):
        code = main(["gen-data", "--spec", "demo", "--seed", "3", "--out", str(tmp_path),
                     "--subjects", "6", "--frames", "24"])
        assert code == 0
        a = hashlib.sha256((data_dir / "annotations.csv").read_bytes()).hexdigest()
        b = hashlib.sha256((tmp_path / "annotations.csv").read_bytes()).hexdigest()
        assert a == b


class TestAnalyze:
    def test_reports_written(self, data_dir, tmp_path):
        code = main(["analyze", str(data_dir / "annotations.csv"), "--out", str(tmp_path)])
        assert code == 0
        for name in ("base_rates.csv", "census.csv", "histogram.csv",
                     "task_top_patterns.csv", "cli_manifest.json"):
            assert (tmp_path / name).exists()
        hist = (tmp_path / "histogram.csv").read_text().strip().splitlines()[1:]
        total = sum(float(l.split(",")[3]) for l in hist)
        assert abs(total - 100.0) <= 1e-6

    def test_single_frame_file(self, tmp_path):
        f = tmp_path / "one.csv"
        f.write_text("subject,task,frame,AU1,AU2\nS1,T1,0,1,0\n")
        code = main(["analyze", str(f), "--out", str(tmp_path / "out")])
        assert code == 0
        census = (tmp_path / "out" / "census.csv").read_text().strip().splitlines()
        assert len(census) == 2  # header + one pattern

    def test_parse_error_exit_code_and_row(self, tmp_path, capsys):
        f = tmp_path / "bad.csv"
        f.write_text("subject,task,frame,AU1,AU2\nS1,T1,0,1,0\nS1,T1,1,5,0\n")
        code = main(["analyze", str(f), "--out", str(tmp_path / "out")])
        assert code == 2
        assert "row 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["analyze", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


class TestPaperTables:
    def test_known_single_violation(self, tmp_path, capsys):
        code = main(["paper-tables", "--out", str(tmp_path)])
        captured = capsys.readouterr().out
        # the bundled reference tables carry exactly one internal
        # inconsistency beyond tolerance (AU1 of the all-active control)
        assert code == 3
        assert "fixture checks: 1 violation(s)" in captured
        assert "ones[AU1].f1_binary" in captured
        manifest = json.loads((tmp_path / "cli_manifest.json").read_text())
        assert len(manifest["failures"]) == 1

    def test_reports_written(self, tmp_path):
        main(["paper-tables", "--out", str(tmp_path)])
        for name in ("correlations_bp4d.csv", "correlations_disfa.csv",
                     "std_bp4d.csv", "std_disfa.csv", "ones_consistency.csv",
                     "histogram_check.csv"):
            assert (tmp_path / name).exists()
        corr = (tmp_path / "correlations_bp4d.csv").read_text()
        assert "FAIL" not in corr

    def test_tampered_fixture_dir(self, tmp_path):
        fdir = tmp_path / "fixtures"
        fdir.mkdir()
        for f in fixture_path("checksums.json").parent.iterdir():
            shutil.copy(f, fdir / f.name)
        target = fdir / "disfa_rates.csv"
        target.write_text(target.read_text().replace("0.235", "0.335"))
        code = main(["paper-tables", "--fixtures", str(fdir), "--out", str(tmp_path / "o")])
        assert code == 2


class TestRun:
    def test_exp1_deterministic_reports(self, run_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "exp1", "--config", str(run_config), "--out", str(out1)]) == 0
        assert main(["run", "exp1", "--config", str(run_config), "--out", str(out2)]) == 0
        h1 = hashlib.sha256((out1 / "metrics_exp1.csv").read_bytes()).hexdigest()
        h2 = hashlib.sha256((out2 / "metrics_exp1.csv").read_bytes()).hexdigest()
        assert h1 == h2
        manifest = json.loads((out1 / "cli_manifest.json").read_text())
        assert manifest["run_manifest"]["fold_subjects"]

    def test_exp3_then_exp4_and_unseen(self, run_config, tmp_path):
        e3 = tmp_path / "e3"
        assert main(["run", "exp3", "--config", str(run_config), "--out", str(e3)]) == 0
        assert (e3 / "codebook.json").exists()
        assert (e3 / "pattern_fold0.ckpt").exists()
        e4 = tmp_path / "e4"
        assert main(["run", "exp4", "--config", str(run_config), "--out", str(e4),
                     "--pretrained", str(e3)]) == 0
        assert (e4 / "metrics_exp4_split.csv").exists()
        eu = tmp_path / "eu"
        assert main(["run", "unseen", "--config", str(run_config), "--out", str(eu),
                     "--pretrained", str(e3)]) == 0
        assert (eu / "metrics_unseen.csv").exists()

    def test_exp4_without_pretrained(self, run_config, tmp_path, capsys):
        code = main(["run", "exp4", "--config", str(run_config), "--out", str(tmp_path / "x")])
        assert code == 1
        assert "exp3" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"sede": 1}')
        code = main(["run", "exp1", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_flag_overrides_config(self, run_config, tmp_path):
        out1, out2 = tmp_path / "s5", tmp_path / "s6"
        assert main(["run", "exp1", "--config", str(run_config), "--out", str(out1)]) == 0
        assert main(["run", "exp1", "--config", str(run_config), "--seed", "6",
                     "--out", str(out2)]) == 0
        m2 = json.loads((out2 / "cli_manifest.json").read_text())
        assert m2["config"]["seed"] == 6


class TestMisc:
    def test_report_prints(self, run_config, tmp_path, capsys):
        out = tmp_path / "r"
        main(["run", "exp1", "--config", str(run_config), "--out", str(out)])
        capsys.readouterr()
        assert main(["report", str(out / "metrics_exp1.csv")]) == 0
        printed = capsys.readouterr().out
        assert "f1_binary" in printed and "AVG" in printed

    def test_usage_error_exit_code(self):
        assert main(["run", "exp9", "--out", "x"]) == 1
        assert main(["bogus"]) == 1
