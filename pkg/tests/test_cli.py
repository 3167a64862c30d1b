import json
import subprocess
import sys

import pytest

from actiseq.cli import main
from actiseq.demo import demo_csv_path

TINY_CONFIG = {
    "evolution": {"max_evaluations": 1200},
    "noise": {"grid": [0.0, 0.1]},
    "seed": 5,
}


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, cfg_path):
    """Run synth -> train -> fit-hmm once and share the artifacts."""
    root = tmp_path_factory.mktemp("pipeline")
    synth = root / "synthetic.csv"
    model = root / "cascade.json"
    hmm = root / "status.json"
    demo = str(demo_csv_path())
    assert main(["synth", "--out", str(synth), "--config", str(cfg_path)]) == 0
    assert main(["train", str(synth), "--out", str(model), "--config", str(cfg_path)]) == 0
    assert main(["fit-hmm", demo, str(model), "--out", str(hmm), "--config", str(cfg_path)]) == 0
    return {"root": root, "synth": synth, "model": model, "hmm": hmm, "demo": demo}


class TestBasics:
    def test_print_default_config(self, capsys):
        assert main(["--print-default-config"]) == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["evolution"]["population_size"] == 100
        assert cfg["evolution"]["max_evaluations"] == 80_000
        assert cfg["folds"] == 10
        assert len(cfg["noise"]["grid"]) == 21

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_unknown_flag_is_usage_error(self):
        assert main(["synth", "--frobnicate"]) == 1

    def test_missing_out_is_usage_error(self):
        assert main(["synth"]) == 1

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "actiseq", "--print-default-config"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        json.loads(proc.stdout)

    def test_corrupt_csv_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,steps,distance_m,duration_s\n2024-01-01,-3,1,1\n")
        assert main(["synth", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
        assert ":2:" in capsys.readouterr().err

    def test_bad_config_is_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"folds": 1}))
        assert main(["synth", "--out", str(tmp_path / "o.csv"), "--config", str(cfg)]) == 3
        assert "config error" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"spam": 1}))
        assert main(["synth", "--out", str(tmp_path / "o.csv"), "--config", str(cfg)]) == 3


class TestSynth:
    def test_demo_profile_row_count(self, tmp_path, cfg_path):
        out = tmp_path / "synth.csv"
        assert main(["synth", "--out", str(out), "--config", str(cfg_path)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1001  # header + 200 per class x 5 classes
        manifest = json.loads((tmp_path / "synth.csv.manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["seed"] == 5

    def test_byte_identical_given_seed(self, tmp_path, cfg_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(["synth", "--out", str(a), "--config", str(cfg_path)]) == 0
        assert main(["synth", "--out", str(b), "--config", str(cfg_path)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_class_warning_in_manifest(self, tmp_path):
        raw = tmp_path / "raw.csv"
        rows = ["date,steps,distance_m,duration_s,label"]
        for i in range(1, 21):
            rows.append(f"2024-01-{i:02d},{100 * i},{80 * i},3600,1")
        raw.write_text("\n".join(rows) + "\n")
        out = tmp_path / "synth.csv"
        assert main(["synth", str(raw), "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "synth.csv.manifest.json").read_text())
        assert any("global duration pool" in w for w in manifest["warnings"])


class TestTrainedPipeline:
    def test_model_json_fields(self, pipeline):
        model = json.loads(pipeline["model"].read_text())
        assert model["K"] == 5 and model["M"] == 6
        assert len(model["stages"]) == 5
        assert "version" in model

    def test_evolution_logs_written(self, pipeline):
        logs = sorted(pipeline["root"].glob("cascade_class*_log.csv"))
        assert len(logs) == 5
        for log in logs:
            header = log.read_text().splitlines()[0]
            assert header == "generation,best_error,frontier_size,mean_size"

    def test_hmm_json_fields(self, pipeline):
        hmm = json.loads(pipeline["hmm"].read_text())
        assert hmm["K"] == 5 and hmm["M"] == 6
        assert len(hmm["pi"]) == 5
        assert len(hmm["B"][0]) == 6

    def test_predict_full_demo(self, pipeline, tmp_path):
        out = tmp_path / "pred.csv"
        code = main(
            ["predict", pipeline["demo"], str(pipeline["model"]), str(pipeline["hmm"]),
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "date,observation,predicted_state,label,match"
        assert len(lines) == 365

    def test_predict_single_day(self, pipeline, tmp_path):
        one = tmp_path / "one.csv"
        one.write_text("date,steps,distance_m,duration_s\n2024-01-01,4000,5000,7200\n")
        out = tmp_path / "pred.csv"
        code = main(
            ["predict", str(one), str(pipeline["model"]), str(pipeline["hmm"]),
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "date,observation,predicted_state"
        assert len(lines) == 2

    def test_train_requires_labels(self, pipeline, tmp_path):
        unlabeled = tmp_path / "unlabeled.csv"
        unlabeled.write_text("date,steps,distance_m,duration_s\n2024-01-01,1,1,10\n")
        assert main(["train", str(unlabeled), "--out", str(tmp_path / "m.json")]) == 2


class TestExperiment:
    def test_outputs_and_determinism(self, tmp_path, cfg_path):
        run1 = tmp_path / "run1"
        run2 = tmp_path / "run2"
        for run in (run1, run2):
            code = main(
                ["experiment", "--config", str(cfg_path), "--out", str(run), "--threads", "1"]
            )
            assert code == 0
        for name in ("report.csv", "summary.csv", "rankings.csv", "predictions.csv"):
            assert (run1 / name).read_bytes() == (run2 / name).read_bytes()
        manifest = json.loads((run1 / "manifest.json").read_text())
        assert manifest["command"] == "experiment"
        report_lines = (run1 / "report.csv").read_text().splitlines()
        assert report_lines[0] == "participant,lambda,model,fold,error"
        assert len(report_lines) == 1 + 2 * 10  # two levels x ten folds

    def test_report_regenerates_from_predictions(self, tmp_path, cfg_path):
        import csv as _csv

        out = tmp_path / "run"
        assert main(["experiment", "--config", str(cfg_path), "--out", str(out)]) == 0
        preds = list(_csv.DictReader(open(out / "predictions.csv")))
        regenerated = {}
        for row in preds:
            key = (row["participant"], row["lambda"], row["model"], row["fold"])
            hit, total = regenerated.get(key, (0, 0))
            regenerated[key] = (hit + (row["predicted"] == row["label"]), total + 1)
        for row in _csv.DictReader(open(out / "report.csv")):
            key = (row["participant"], row["lambda"], row["model"], row["fold"])
            hit, total = regenerated[key]
            assert float(row["error"]) == 1.0 - hit / total
