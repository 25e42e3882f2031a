import json

import numpy as np
from click.testing import CliRunner
from numpy.testing import assert_allclose

from bayes_reduce.cli import main
from bayes_reduce.experiments import dump_model_json
from helpers import random_model


def write_model(tmp_path, seed=0, n=8, q=3):
    rng = np.random.default_rng(seed)
    model = random_model(rng, n, q)
    path = tmp_path / "model.json"
    path.write_text(dump_model_json(model))
    return path, model


def write_config(tmp_path, **overrides):
    raw = {
        "experiment": "regression1d",
        "q": 6,
        "n": 60,
        "methods": ["mi", "pca-y"],
        "r_grid": [2, 6],
        "seeds": {"data": 1, "method": 2},
    }
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


class TestRun:
    def test_writes_csv_and_figures(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "rows.csv"
        result = CliRunner().invoke(main, ["run", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert (tmp_path / "rows_j0.png").exists()
        assert (tmp_path / "rows_mi_rel_err.png").exists()

    def test_no_plot_skips_figures(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "rows.csv"
        result = CliRunner().invoke(
            main, ["run", "--config", str(config), "--out", str(out), "--no-plot"]
        )
        assert result.exit_code == 0, result.output
        assert not (tmp_path / "rows_j0.png").exists()

    def test_stdout_when_no_destination(self, tmp_path):
        config = write_config(tmp_path)
        result = CliRunner().invoke(main, ["run", "--config", str(config)])
        assert result.exit_code == 0
        assert result.output.splitlines()[0].startswith("method,r,")

    def test_seed_override_changes_data(self, tmp_path):
        config = write_config(tmp_path)
        runner = CliRunner()
        base = runner.invoke(main, ["run", "--config", str(config)]).output
        other = runner.invoke(main, ["run", "--config", str(config), "--seed", "99"]).output
        assert base != other
        again = runner.invoke(main, ["run", "--config", str(config), "--seed", "99"]).output
        assert other == again

    def test_invalid_config_fails_with_diagnostic(self, tmp_path):
        config = write_config(tmp_path, methods=[])
        result = CliRunner().invoke(main, ["run", "--config", str(config)])
        assert result.exit_code == 1
        assert "error:" in result.output

    def test_invalid_config_writes_no_file(self, tmp_path):
        config = write_config(tmp_path, methods=[])
        out = tmp_path / "never.csv"
        CliRunner().invoke(main, ["run", "--config", str(config), "--out", str(out)])
        assert not out.exists()


class TestEig:
    def test_prints_spectrum_and_error_curve(self, tmp_path):
        path, model = write_model(tmp_path)
        result = CliRunner().invoke(main, ["eig", "--model", str(path), "--top", "3"])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0] == "r,nu,mi_rel_err"
        assert len(lines) == 4
        # Spectrum is descending and the error curve hits zero at full rank.
        nus = [float(line.split(",")[1]) for line in lines[1:]]
        assert nus == sorted(nus, reverse=True)
        assert float(lines[3].split(",")[2]) == 0.0

    def test_missing_model_file(self, tmp_path):
        result = CliRunner().invoke(main, ["eig", "--model", str(tmp_path / "x.json"), "--top", "2"])
        assert result.exit_code != 0


class TestReduce:
    def test_writes_basis_csv(self, tmp_path):
        path, model = write_model(tmp_path)
        out = tmp_path / "basis.csv"
        result = CliRunner().invoke(
            main,
            ["reduce", "--model", str(path), "--method", "mi", "--r", "2",
             "--out-basis", str(out)],
        )
        assert result.exit_code == 0, result.output
        rows = [line.split(",") for line in out.read_text().strip().splitlines()]
        basis = np.array([[float(v) for v in row] for row in rows])
        assert basis.shape == (8, 2)
        from bayes_reduce.information import signal_eigenpairs

        expected = signal_eigenpairs(model.problem()).vectors[:, :2]
        assert_allclose(basis, expected, atol=1e-12)

    def test_kld_method_uses_seeded_measurement(self, tmp_path):
        path, _ = write_model(tmp_path)
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        runner = CliRunner()
        for out in (out_a, out_b):
            result = runner.invoke(
                main,
                ["reduce", "--model", str(path), "--method", "kld", "--r", "2",
                 "--out-basis", str(out), "--seed", "5"],
            )
            assert result.exit_code == 0, result.output
        assert out_a.read_text() == out_b.read_text()

    def test_unknown_method_rejected(self, tmp_path):
        path, _ = write_model(tmp_path)
        result = CliRunner().invoke(
            main,
            ["reduce", "--model", str(path), "--method", "nope", "--r", "2",
             "--out-basis", str(tmp_path / "o.csv")],
        )
        assert result.exit_code != 0
