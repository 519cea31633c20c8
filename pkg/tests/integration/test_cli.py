"""Integration tests for the gyrobs command line."""

import json

import pytest
from typer.testing import CliRunner

from gyrobs.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, app
from gyrobs.services.export import read_run_csv
from gyrobs.utils.matrix_lie import LieAlgebraError

SHORT_RUN = """
[simulation]
duration = 2.0
step = 0.02
seed = 1

[simulation.angular_velocity]
kind = "constant"
omega = [0.0, 0.1, 0.2]

[simulation.gyro]
bias = [0.0, 0.1, -0.2]

[observer]
variant = "g_identity"

[gains]
k_P = {k_P}
k_I = 1.5
"""

SINGULAR_COMPARE = """
[simulation]
duration = 1.0
step = 0.02

[simulation.gyro]
bias = [0.0, 0.1, -0.2]

[scene]
kind = "vectors"
directions = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
weights = [1.0, 1.0, 1.0]

[observer]
variant = "diag_form"

[gains]
k_P = 2.5
k_I = 1.5

[initial_conditions]
A_bar = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]

[mahony]
"""

SHORT_MONTECARLO = """
[simulation]
duration = 4.0
step = 0.05
seed = 7

[simulation.gyro]
bias = [0.0, 0.1, -0.2]

[scene]
kind = "matrix"
G = [[1.2, 0.1, 0.0], [0.0, 1.0, 0.1], [0.05, 0.0, 0.9]]

[observer]
variant = "base"

[gains]
k_P = 2.5
k_I = 1.5

[montecarlo]
trials = 5
init_box = 1.0
"""


@pytest.fixture
def runner():
    """Typer CLI runner."""
    return CliRunner()


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestRunCommand:
    """Test `gyrobs run`."""

    def test_short_run(self, runner, tmp_path):
        """Test a short certified run writes its CSV and summary."""
        config = _write(tmp_path, "short.toml", SHORT_RUN.format(k_P=2.5))
        out = tmp_path / "out"
        result = runner.invoke(app, ["run", "-c", config, "-o", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        df = read_run_csv(out / "short.csv")
        assert df.height == 101
        summary = json.loads((out / "short_summary.json").read_text(encoding="utf-8"))
        assert summary["samples"] == 101
        assert summary["verify_decay"]["passed"] is True

    def test_negative_gain(self, runner, tmp_path):
        """Test k_P = -1 exits with the configuration code."""
        config = _write(tmp_path, "bad.toml", SHORT_RUN.format(k_P=-1.0))
        result = runner.invoke(app, ["run", "-c", config, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CONFIG
        assert not (tmp_path / "out").exists()

    def test_unknown_key(self, runner, tmp_path):
        """Test an unknown key exits with the configuration code."""
        config = _write(tmp_path, "typo.toml", SHORT_RUN.format(k_P=2.5) + "\n[output]\ndirectroy = \"x\"\n")
        result = runner.invoke(app, ["run", "-c", config, "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_missing_config(self, runner, tmp_path):
        """Test an unknown config name exits with the configuration code."""
        result = runner.invoke(app, ["run", "-c", "no_such_config", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    @pytest.mark.slow
    def test_bench_replica(self, runner, tmp_path):
        """Test the bundled bench replica passes with 1501 samples and a plot script."""
        result = runner.invoke(app, ["run", "-c", "paper_experiment", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_OK, result.output
        assert read_run_csv(tmp_path / "paper_experiment.csv").height == 1501
        assert (tmp_path / "plot_paper_experiment.py").exists()


class TestCompareCommand:
    """Test `gyrobs compare`."""

    def test_missing_mahony_section(self, runner, tmp_path):
        """Test a config without [mahony] is a configuration error."""
        result = runner.invoke(app, ["compare", "-c", "montecarlo_global", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_matrix_scene_rejected(self, runner, tmp_path):
        """Test a matrix-signal config cannot be compared."""
        config = _write(tmp_path, "matrix.toml", SHORT_RUN.format(k_P=2.5) + "\n[mahony]\n")
        result = runner.invoke(app, ["compare", "-c", config, "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_singular_initial_estimate(self, runner, tmp_path):
        """Test A_bar(0) = 0 has no Mahony start and exits with the configuration code."""
        config = _write(tmp_path, "zero.toml", SINGULAR_COMPARE)
        result = runner.invoke(app, ["compare", "-c", config, "-o", str(tmp_path / "out")])
        assert result.exit_code == EXIT_CONFIG
        assert not isinstance(result.exception, LieAlgebraError)
        assert not (tmp_path / "out").exists()


class TestMonteCarloCommand:
    """Test `gyrobs montecarlo`."""

    def test_zero_trials(self, runner, tmp_path):
        """Test -n 0 is a configuration error."""
        result = runner.invoke(app, ["montecarlo", "-c", "montecarlo_global", "-n", "0", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG

    def test_negative_box(self, runner, tmp_path):
        """Test a negative init box is a configuration error."""
        result = runner.invoke(
            app, ["montecarlo", "-c", "montecarlo_global", "--init-box", "-1", "-o", str(tmp_path)]
        )
        assert result.exit_code == EXIT_CONFIG

    def test_reproducible_smoke(self, runner, tmp_path):
        """Test five trials write five rows with identical bytes across invocations."""
        config = _write(tmp_path, "mc.toml", SHORT_MONTECARLO)
        outputs = []
        for label in ("first", "second"):
            out = tmp_path / label
            result = runner.invoke(app, ["montecarlo", "-c", config, "-o", str(out)])
            assert result.exit_code in (EXIT_OK, EXIT_FAILED), result.output
            outputs.append((out / "mc_montecarlo.csv").read_bytes())
        assert outputs[0] == outputs[1]
        assert len(outputs[0].decode("utf-8").splitlines()) == 1 + 5


class TestSelfcheckCommand:
    """Test `gyrobs selfcheck`."""

    def test_passes(self, runner):
        """Test the battery exits 0."""
        result = runner.invoke(app, ["selfcheck"])
        assert result.exit_code == EXIT_OK, result.output

    def test_perturbed_hat_fails(self, runner):
        """Test the sign-flipped hat map exits 1."""
        result = runner.invoke(app, ["selfcheck", "--perturb-hat"])
        assert result.exit_code == EXIT_FAILED


class TestCertificateCommand:
    """Test `gyrobs certificate`."""

    def test_dump(self, runner, tmp_path):
        """Test the certificate is audited and written."""
        result = runner.invoke(
            app, ["certificate", "-c", "montecarlo_global", "--samples", "500", "-o", str(tmp_path)]
        )
        assert result.exit_code == EXIT_OK, result.output
        document = json.loads((tmp_path / "montecarlo_global_certificate.json").read_text(encoding="utf-8"))
        assert document["variant"] == "base"
        assert document["certificate"]["a"] > 0
        assert document["audit"]["passed"] is True

    def test_uncertified_variant(self, runner, tmp_path):
        """Test the inverse variant has no certificate."""
        result = runner.invoke(app, ["certificate", "-c", "inverse_variant_demo", "-o", str(tmp_path)])
        assert result.exit_code == EXIT_CONFIG
