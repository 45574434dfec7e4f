import json

import pytest

from gridshield import __version__
from gridshield.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main


@pytest.fixture
def write_json(tmp_path):
    def _write(data, name):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write


@pytest.fixture
def tiny_scenario(write_json, model_file, tiny_model_data):
    model_file(tiny_model_data, "tiny.json")
    return write_json({
        "model_path": "tiny.json",
        "steps": 5,
        "seed": 3,
        "estimators": [{"estimator": "LeastSquares"}, {"estimator": "PCNA", "rho": 0.0}],
    }, "scenario.json")


class TestValidateCommand:
    """Test cases for `gridshield validate`."""

    def test_bundled_model(self, capsys):
        assert main(["validate", "--model", "bundled:ieee14_surrogate"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["rank_C"] == 10
        assert report["violations"] == []

    def test_rank_deficient_model(self, capsys, model_file, tiny_model_data):
        path = model_file(dict(tiny_model_data, C=[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [1.0, 1.0]]))
        assert main(["validate", "--model", str(path)]) == EXIT_CONFIG
        assert "C rank < p" in capsys.readouterr().out

    def test_missing_file(self, capsys, tmp_path):
        assert main(["validate", "--model", str(tmp_path / "none.json")]) == EXIT_CONFIG
        assert capsys.readouterr().err.startswith("error:")

    def test_schema_violation(self, capsys, model_file, tiny_model_data):
        path = model_file(dict(tiny_model_data, sigma_v2=-1.0))
        assert main(["validate", "--model", str(path)]) == EXIT_CONFIG


class TestAttackGenCommand:
    """Test cases for `gridshield attack-gen`."""

    def test_targeted_attack(self, capsys, write_json):
        spec = write_json({"kind": "targeted", "targets": [3], "c": [10.0]}, "spec.json")
        assert main(["attack-gen", "--model", "bundled:ieee14_surrogate", "--spec", str(spec)]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["support"] == [2, 4, 7, 19, 22, 28, 31]
        assert "e" not in out

    def test_output_file(self, write_json, tmp_path):
        spec = write_json({"kind": "random", "m": 4}, "spec.json")
        out = tmp_path / "attack.json"
        assert main(["attack-gen", "--model", "bundled:ieee14_surrogate", "--spec", str(spec), "--out", str(out), "--seed", "2"]) == EXIT_OK
        assert len(json.loads(out.read_text())["support"]) == 4

    def test_no_stealthy_attack_is_numerical(self, capsys, write_json):
        spec = write_json({"kind": "specific_sensor", "sensors": [5, 6], "d": [1.0, 1.0]}, "spec.json")
        assert main(["attack-gen", "--model", "bundled:ieee14_surrogate", "--spec", str(spec)]) == EXIT_NUMERICAL
        assert "no stealthy attack" in capsys.readouterr().err

    def test_unknown_kind(self, write_json):
        spec = write_json({"kind": "replay"}, "spec.json")
        assert main(["attack-gen", "--model", "bundled:ieee14_surrogate", "--spec", str(spec)]) == EXIT_CONFIG

    def test_unreadable_spec(self, tmp_path):
        assert main(["attack-gen", "--model", "bundled:ieee14_surrogate", "--spec", str(tmp_path / "x.json")]) == EXIT_CONFIG


class TestSimulateCommand:
    """Test cases for `gridshield simulate`."""

    def test_csv_to_file(self, tiny_scenario, tmp_path):
        out = tmp_path / "reports" / "rmse.csv"
        assert main(["simulate", "--config", str(tiny_scenario), "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "step,estimator,rmse"
        assert len(lines) == 1 + 5 * 2

    def test_json_to_stdout(self, capsys, tiny_scenario):
        assert main(["simulate", "--config", str(tiny_scenario), "--format", "json", "--runs", "2"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["runs"] == 2
        assert set(report["rmse"]) == {"LeastSquares", "PCNA"}

    def test_seed_override(self, capsys, tiny_scenario):
        main(["simulate", "--config", str(tiny_scenario)])
        base = capsys.readouterr().out
        main(["simulate", "--config", str(tiny_scenario), "--seed", "3"])
        same = capsys.readouterr().out
        main(["simulate", "--config", str(tiny_scenario), "--seed", "4"])
        other = capsys.readouterr().out
        assert base == same
        assert base != other

    def test_invalid_runs(self, tiny_scenario):
        assert main(["simulate", "--config", str(tiny_scenario), "--runs", "0"]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG


class TestBenchCommand:
    """Test cases for `gridshield bench`."""

    def test_writes_table(self, tmp_path):
        out = tmp_path / "bench.json"
        assert main(["bench", "--p", "3,4", "--reps", "5", "--steps", "2", "--out", str(out)]) == EXIT_OK
        rows = json.loads(out.read_text())["rows"]
        assert sorted({(r["p"], r["n"]) for r in rows}) == [(3, 9), (4, 12)]

    def test_too_few_repetitions(self, tmp_path):
        assert main(["bench", "--p", "3", "--reps", "2", "--out", str(tmp_path / "b.csv")]) == EXIT_CONFIG

    def test_bad_dimension_list(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["bench", "--p", "ten", "--out", str(tmp_path / "b.csv")])


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_command_required(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2
