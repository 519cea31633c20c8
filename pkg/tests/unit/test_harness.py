"""Unit tests for the simulation harness."""

from dataclasses import replace

import numpy as np
import pytest

from gyrobs.models.certificate import LyapunovCertificate
from gyrobs.models.run import TAIL_RESIDUAL_TOL, RunConfig
from gyrobs.models.signals import (
    ConstantProfile,
    GyroModel,
    MatrixSignalModel,
    SinusoidalProfile,
    VectorScene,
)
from gyrobs.models.state import Gains, ObserverState, TrueState
from gyrobs.models.variant import ObserverVariant
from gyrobs.services import harness
from gyrobs.services.harness import (
    ComparisonError,
    DivergenceError,
    RateFitError,
    analyze_run,
    compare_observers,
    error_metrics,
    fit_exponential_rate,
    fit_tail_rate,
    integrate_run,
    mahony_counterpart,
    tail_window,
    time_to_threshold,
)
from gyrobs.utils.matrix_lie import exp_so3, hat, random_rotation

BENCH_GAINS = Gains(k_P=2.5, k_I=1.5)
BIAS = np.array([0.0, 0.1, -0.2])
PROFILE = SinusoidalProfile(
    offset=[0.0, 0.0, 0.0],
    amplitude=[0.3, 0.2, 0.4],
    frequency=[0.1, 0.15, 0.2],
    phase=[0.0, 1.0, 2.0],
)


@pytest.fixture
def matrix_variant():
    """Base variant on a constant non-trivial G."""
    G = np.array([[1.2, 0.1, 0.0], [0.0, 1.0, 0.1], [0.05, 0.0, 0.9]])
    return ObserverVariant(kind="base", signal=MatrixSignalModel(G0=G))


@pytest.fixture
def scene_variant():
    """Diagonal-form variant on three marker directions."""
    S = np.array([[0.0, 0.0, 1.0], [0.98, 0.0, 0.2], [0.0, 0.96, 0.29]]).T
    return ObserverVariant(kind="diag_form", scene=VectorScene(S=S, W=[1.0, 1.0, 1.0]))


def _config(variant, duration=10.0, step=0.02, A_bar0=None, b_bar0=None, R0=None, **kwargs):
    R0 = np.eye(3) if R0 is None else R0
    if A_bar0 is None:
        G = variant.signal.G0 if variant.signal is not None else variant.scene.G
        A_bar0 = G @ R0
    return RunConfig(
        duration=duration,
        step=step,
        profile=kwargs.pop("profile", PROFILE),
        gyro=kwargs.pop("gyro", GyroModel(bias=BIAS)),
        variant=variant,
        gains=BENCH_GAINS,
        R0=R0,
        A_bar0=A_bar0,
        b_bar0=BIAS if b_bar0 is None else b_bar0,
        **kwargs,
    )


class TestErrorMetrics:
    """Test the error norms and their sandwich."""

    def test_zero_error(self):
        """Test a perfect estimate gives (0, 0, 0)."""
        R = random_rotation(0)
        G = np.diag([2.0, 1.0, 0.5])
        metrics = error_metrics(TrueState(R=R, b=BIAS), ObserverState(A_bar=G @ R, b_bar=BIAS), G)
        assert metrics == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)

    def test_identity_gain(self):
        """Test G = I gives |E_A| = |E_R| exactly."""
        rng = np.random.default_rng(1)
        est = ObserverState(A_bar=rng.standard_normal((3, 3)), b_bar=np.zeros(3))
        e_A, _, e_R = error_metrics(TrueState(R=random_rotation(rng), b=np.zeros(3)), est, np.eye(3))
        assert e_A == e_R

    def test_sandwich(self):
        """Test |E_R| / |G^-1| <= |E_A| <= |G| |E_R|."""
        rng = np.random.default_rng(2)
        for _ in range(200):
            G = rng.standard_normal((3, 3)) + 2.0 * np.eye(3)
            est = ObserverState(A_bar=rng.standard_normal((3, 3)), b_bar=rng.standard_normal(3))
            e_A, _, e_R = error_metrics(TrueState(R=random_rotation(rng), b=np.zeros(3)), est, G)
            assert e_R / np.linalg.norm(np.linalg.inv(G)) <= e_A * (1 + 1e-12)
            assert e_A <= np.linalg.norm(G) * e_R * (1 + 1e-12)


class TestIntegrateRun:
    """Test the co-integration of truth and observer."""

    def test_equilibrium_is_preserved(self, matrix_variant):
        """Test zero initial error stays below 1e-9 for 10 s."""
        record = integrate_run(_config(matrix_variant))
        assert np.max(record.e_A_norm) < 1e-9
        assert np.max(record.e_b_norm) < 1e-9

    @pytest.mark.parametrize("kind", ["g_identity", "inverse"])
    def test_equilibrium_other_variants(self, kind):
        """Test equilibrium holds for the identity-gain and inverse variants."""
        signal = None if kind == "g_identity" else MatrixSignalModel(G0=np.diag([1.5, 1.0, 0.8]))
        variant = ObserverVariant(kind=kind, signal=signal)
        G = np.eye(3) if signal is None else signal.G0
        record = integrate_run(_config(variant, duration=5.0, A_bar0=G))
        assert np.max(record.error_sum) < 1e-9
        assert np.all(np.isnan(record.V)) == (kind == "inverse")

    def test_equilibrium_scene_variant(self, scene_variant):
        """Test a vector-form observer stays at equilibrium."""
        record = integrate_run(_config(scene_variant, duration=5.0))
        assert np.max(record.error_sum) < 1e-9

    def test_grid_and_lengths(self, matrix_variant):
        """Test samples sit on the uniform grid with equal series lengths."""
        record = integrate_run(_config(matrix_variant, duration=2.0))
        assert len(record.t) == 101
        np.testing.assert_allclose(np.diff(record.t), 0.02, rtol=1e-12)
        for series in (record.e_A_norm, record.e_b_norm, record.e_R_norm, record.V, record.V_bound):
            assert len(series) == 101
        assert record.A_bar.shape == (101, 3, 3)

    def test_converges_from_large_error(self, matrix_variant):
        """Test a near-antipodal start converges and honors its certificate."""
        config = _config(
            matrix_variant,
            duration=30.0,
            A_bar0=matrix_variant.signal.G0 @ exp_so3([0.0, 0.0, 0.99 * np.pi]),
            b_bar0=np.zeros(3),
        )
        analysis = analyze_run(config)
        assert analysis.record.e_b_norm[-1] < 1e-4
        assert analysis.decay.passed
        assert analysis.passed

    def test_deterministic(self, matrix_variant):
        """Test identical configs give bit-identical records."""
        gyro = GyroModel(bias=BIAS, noise_std=0.01, seed=9)
        config = _config(matrix_variant, duration=2.0, gyro=gyro, A_bar0=np.eye(3))
        first, second = integrate_run(config), integrate_run(config)
        np.testing.assert_array_equal(first.e_A_norm, second.e_A_norm)
        np.testing.assert_array_equal(first.A_bar, second.A_bar)

    def test_fourth_order_convergence(self, matrix_variant):
        """Test halving the step shrinks the final-state error about 16 times."""
        A_bar0 = matrix_variant.signal.G0 @ exp_so3([0.3, -0.2, 1.0])
        finals = []
        for step in (0.04, 0.02, 0.01):
            record = integrate_run(
                _config(matrix_variant, duration=4.0, step=step, A_bar0=A_bar0, b_bar0=np.zeros(3)),
                certificate=False,
            )
            finals.append(np.concatenate([record.A_bar[-1].ravel(), record.b_bar[-1]]))
        ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
        assert 10.0 < ratio < 24.0

    def test_attitude_error_ceiling(self, matrix_variant):
        """Test the polar attitude error never exceeds 2 sqrt(2)."""
        config = _config(
            matrix_variant,
            A_bar0=matrix_variant.signal.G0 @ exp_so3([0.0, 0.0, 0.99 * np.pi]),
            b_bar0=np.zeros(3),
        )
        record = integrate_run(config)
        finite = record.e_R_polar_norm[np.isfinite(record.e_R_polar_norm)]
        assert np.max(finite) <= 2.0 * np.sqrt(2.0) + 1e-9

    def test_bound_column(self, matrix_variant):
        """Test V_bound is V(0) exp(-beta t)."""
        config = _config(matrix_variant, duration=2.0, A_bar0=np.eye(3), b_bar0=np.zeros(3))
        record = integrate_run(config)
        assert isinstance(record.certificate, LyapunovCertificate)
        np.testing.assert_allclose(record.V_bound, record.V[0] * np.exp(-record.certificate.beta * record.t))

    def test_divergence_reported(self):
        """Test a non-finite state raises DivergenceError."""
        variant = ObserverVariant(kind="g_identity")
        config = _config(variant, duration=1.0, A_bar0=np.eye(3), profile=ConstantProfile(omega=[1e308, 1e308, 0.0]))
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergenceError):
            integrate_run(config, certificate=False)

    def test_time_varying_converges(self):
        """Test the time-varying variant converges under a rotating, pulsing G."""
        signal = MatrixSignalModel(
            G0=np.diag([1.5, 1.0, 0.8]), spin=[0.0, 0.0, 0.2], modulation_depth=0.3, modulation_frequency=0.1
        )
        variant = ObserverVariant(kind="time_varying", signal=signal)
        config = _config(variant, duration=60.0, A_bar0=np.zeros((3, 3)), b_bar0=np.zeros(3))
        analysis = analyze_run(config)
        assert analysis.certificate is None
        assert analysis.record.final_error < 1e-4
        assert analysis.record.final_error < 1e-3 * analysis.record.error_sum[0]

    @pytest.mark.parametrize("operation", ["measure_matrix_signal", "scene_to_signal"])
    def test_measurements_use_sensor_operations(
        self, monkeypatch, matrix_variant, scene_variant, operation
    ):
        """Test every RK4 stage reads its signal through the sensor operations."""
        calls = []
        original = getattr(harness, operation)

        def counted(*args, **kwargs):
            calls.append(args)
            return original(*args, **kwargs)

        monkeypatch.setattr(harness, operation, counted)
        variant = matrix_variant if operation == "measure_matrix_signal" else scene_variant
        integrate_run(_config(variant, duration=0.2), certificate=False)
        assert len(calls) == 4 * 10

    def test_truth_stays_on_rotation_group(self, matrix_variant):
        """Test the truth attitude keeps |R^T R - I| below 1e-10 at every sample."""
        config = _config(matrix_variant, A_bar0=np.zeros((3, 3)), b_bar0=np.zeros(3))
        record = integrate_run(config, certificate=False)
        drift = np.linalg.norm(np.swapaxes(record.R, 1, 2) @ record.R - np.eye(3), axis=(1, 2))
        assert record.R.shape == (501, 3, 3)
        assert np.max(drift) < 1e-10

    def test_signal_follows_kinematics(self, matrix_variant):
        """Test central differences of A = G R match A hat(Omega) along a run."""
        config = _config(matrix_variant, duration=5.0, step=0.01)
        record = integrate_run(config, certificate=False)
        A = matrix_variant.signal.G0 @ record.R
        h = config.step
        differenced = (A[2:] - A[:-2]) / (2.0 * h)
        exact = np.stack([A[k] @ hat(PROFILE(record.t[k])) for k in range(1, len(record.t) - 1)])
        assert np.max(np.linalg.norm(differenced - exact, axis=(1, 2))) < 1e-4


class TestRateFit:
    """Test the exponential rate fit."""

    def test_constructed_exponential(self):
        """Test 3 exp(-0.7 t) is recovered."""
        t = np.linspace(0.0, 10.0, 501)
        fit = fit_exponential_rate(t, 3.0 * np.exp(-0.7 * t))
        assert fit.C_fit == pytest.approx(3.0, abs=1e-9)
        assert fit.a_fit == pytest.approx(0.7, abs=1e-9)
        assert fit.residual < 1e-9

    def test_constant_series(self):
        """Test a constant series has zero rate."""
        fit = fit_exponential_rate(np.arange(20.0), np.full(20, 5.0))
        assert fit.a_fit == pytest.approx(0.0, abs=1e-12)

    def test_floor_excluded(self):
        """Test samples at the floating-point floor are dropped."""
        t = np.arange(30.0)
        y = np.exp(-t)
        y[20:] = 0.0
        fit = fit_exponential_rate(t, y)
        assert fit.n_samples == 20
        assert fit.a_fit == pytest.approx(1.0, abs=1e-9)

    def test_steady_attitude_tail_is_log_linear(self):
        """Test a still body with slow real error modes gives a straight log tail.

        With G = I, Omega = 0 and b = 0 the error equations are linear with
        slowest rate (k_P - sqrt(k_P^2 - 4 k_I)) / 2.
        """
        gains = Gains(k_P=2.5, k_I=0.5)
        config = RunConfig(
            duration=60.0,
            step=0.05,
            profile=ConstantProfile(omega=np.zeros(3)),
            gyro=GyroModel(bias=np.zeros(3)),
            variant=ObserverVariant(kind="g_identity"),
            gains=gains,
            A_bar0=exp_so3([0.3, -0.2, 1.0]),
            b_bar0=[0.0, 0.1, -0.2],
        )
        fit = fit_tail_rate(integrate_run(config, certificate=False))
        assert fit.residual < TAIL_RESIDUAL_TOL
        assert fit.log_linear
        slowest = 0.5 * (gains.k_P - np.sqrt(gains.k_P**2 - 4.0 * gains.k_I))
        assert fit.a_fit == pytest.approx(slowest, rel=1e-2)

    def test_insufficient_data(self):
        """Test fewer than 10 usable samples is rejected."""
        with pytest.raises(RateFitError, match="insufficient decay data"):
            fit_exponential_rate(np.arange(9.0), np.ones(9))

    def test_tail_window(self):
        """Test the window spans from the last sample above 1e-2 to the first below 1e-10."""
        y = np.array([1.0, 0.5, 1e-3, 2e-2, 1e-3, 1e-5, 1e-8, 1e-11, 1e-9])
        assert tail_window(y) == slice(4, 7)

    def test_time_to_threshold(self):
        """Test the first time after which a series stays below a threshold."""
        t = np.arange(6.0)
        y = np.array([1.0, 0.05, 0.2, 0.05, 0.01, 0.001])
        assert time_to_threshold(t, y, 0.1) == 3.0
        assert time_to_threshold(t, y, 2.0) == 0.0
        assert time_to_threshold(t, y, 1e-4) is None


class TestComparison:
    """Test proposed-vs-Mahony pairing."""

    def test_counterpart_shares_truth(self, scene_variant):
        """Test the baseline starts from the polar factor of the proposed estimate."""
        R_bar0 = exp_so3([0.0, 0.0, 1.0])
        config = _config(scene_variant, A_bar0=1.3 * scene_variant.scene.G @ R_bar0)
        baseline = mahony_counterpart(config)
        assert baseline.variant.is_mahony
        np.testing.assert_allclose(baseline.R_hat0, R_bar0, atol=1e-12)
        assert baseline.A_bar0 is None

    def test_counterpart_needs_scene(self, matrix_variant):
        """Test a matrix-signal config has no Mahony counterpart."""
        with pytest.raises(ComparisonError):
            mahony_counterpart(_config(matrix_variant))

    def test_counterpart_singular_start(self, scene_variant):
        """Test a singular A_bar(0) has no polar factor to start the baseline from."""
        config = _config(scene_variant, A_bar0=np.zeros((3, 3)))
        with pytest.raises(ComparisonError, match="Mahony initialization"):
            mahony_counterpart(config)

    def test_mismatched_truth_rejected(self, scene_variant):
        """Test baselines on another truth trajectory are rejected."""
        config = _config(scene_variant, duration=2.0)
        baseline = replace(mahony_counterpart(config), gyro=GyroModel(bias=np.zeros(3)))
        with pytest.raises(ComparisonError, match="mismatched truth configurations: gyro"):
            compare_observers(config, baseline)

    def test_both_at_equilibrium_tie(self, scene_variant):
        """Test equilibrium starts tie at every threshold."""
        config = _config(scene_variant, duration=2.0)
        result = compare_observers(config, mahony_counterpart(config))
        for thr in result.thresholds:
            assert result.winner(thr) == "tie"
            assert result.proposed_times[thr] == 0.0
        assert np.max(result.proposed.e_R_polar_norm) < 1e-9
        assert np.max(result.baseline.e_R_norm) < 1e-9

    def test_small_error_both_converge(self, scene_variant):
        """Test a 0.1 rad start converges for both observers with close curves."""
        config = _config(
            scene_variant,
            duration=20.0,
            A_bar0=scene_variant.scene.G @ exp_so3([0.0, 0.0, 0.1]),
        )
        result = compare_observers(config, mahony_counterpart(config))
        assert result.proposed.e_R_polar_norm[-1] < 1e-3
        assert result.baseline.e_R_norm[-1] < 1e-3
        gap = np.abs(result.proposed.e_R_polar_norm - result.baseline.e_R_norm)
        assert np.max(gap) < 0.1
