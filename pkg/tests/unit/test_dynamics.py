"""Unit tests for the signal models and sensor/kinematics functions."""

import numpy as np
import pytest

from gyrobs.models.signals import (
    ConstantProfile,
    GyroModel,
    MatrixSignalModel,
    PiecewiseProfile,
    SceneError,
    SignalModelError,
    SinusoidalProfile,
    VectorScene,
    profile_from_dict,
)
from gyrobs.models.state import Gains, TrueState
from gyrobs.services.dynamics import (
    augment_rank2_scene,
    measure_body_vectors,
    measure_gyro,
    measure_matrix_signal,
    scene_to_signal,
    true_state_derivative,
)
from gyrobs.utils.matrix_lie import LieAlgebraError, exp_so3, hat, random_rotation

QUARTER_TURN_Z = exp_so3([0.0, 0.0, np.pi / 2])


@pytest.fixture
def rng():
    """Fixed generator for random samples."""
    return np.random.default_rng(7)


class TestProfiles:
    """Test the angular velocity profiles."""

    def test_constant(self):
        """Test a constant profile and its bound."""
        profile = ConstantProfile(omega=[0.0, 3.0, 4.0])
        np.testing.assert_array_equal(profile(12.5), [0.0, 3.0, 4.0])
        assert profile.bound() == 5.0

    def test_sinusoidal_bound(self):
        """Test the sinusoidal bound dominates every sample."""
        profile = SinusoidalProfile(
            offset=[0.1, 0.0, 0.0],
            amplitude=[0.3, 0.2, 0.4],
            frequency=[0.1, 0.15, 0.2],
            phase=[0.0, 1.0, 2.0],
        )
        speeds = [np.linalg.norm(profile(t)) for t in np.linspace(0.0, 30.0, 1501)]
        assert max(speeds) <= profile.bound()

    def test_piecewise_segments(self):
        """Test a piecewise schedule switches at its starts."""
        profile = PiecewiseProfile(starts=(0.0, 10.0), omegas=np.array([[0, 0, 1.0], [1.0, 0, 0]]))
        np.testing.assert_array_equal(profile(9.99), [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(profile(10.0), [1.0, 0.0, 0.0])
        assert profile.bound() == 1.0

    def test_piecewise_must_start_at_zero(self):
        """Test a schedule not starting at t = 0 is rejected."""
        with pytest.raises(ValueError, match="start at t = 0"):
            PiecewiseProfile(starts=(1.0,), omegas=np.array([[0.0, 0.0, 1.0]]))

    def test_from_dict(self):
        """Test deserializing each kind."""
        assert isinstance(profile_from_dict({"kind": "constant", "omega": [0, 0, 1]}), ConstantProfile)
        data = {"kind": "piecewise", "schedule": [{"start": 0.0, "omega": [0, 0, 1]}]}
        assert isinstance(profile_from_dict(data), PiecewiseProfile)
        with pytest.raises(ValueError, match="unknown angular velocity kind"):
            profile_from_dict({"kind": "chirp"})


class TestTrueStateDerivative:
    """Test the rigid-body kinematics."""

    def test_at_rest(self):
        """Test zero angular velocity gives a zero derivative."""
        state = TrueState(R=np.eye(3), b=np.zeros(3))
        np.testing.assert_array_equal(true_state_derivative(state, np.zeros(3)), np.zeros((3, 3)))

    def test_identity_attitude(self):
        """Test R = I gives hat(Omega)."""
        state = TrueState(R=np.eye(3), b=np.zeros(3))
        np.testing.assert_array_equal(true_state_derivative(state, [0.0, 0.0, 1.0]), hat([0, 0, 1.0]))

    def test_body_rate_is_skew(self, rng):
        """Test R^T R_dot is skew-symmetric."""
        for _ in range(50):
            R = random_rotation(rng)
            R_dot = true_state_derivative(TrueState(R=R, b=np.zeros(3)), rng.standard_normal(3))
            body = R.T @ R_dot
            assert np.linalg.norm(body + body.T) < 1e-14

    def test_truth_must_be_rotation(self):
        """Test a non-rotation truth attitude is rejected."""
        with pytest.raises(LieAlgebraError):
            TrueState(R=2.0 * np.eye(3), b=np.zeros(3))


class TestMeasureGyro:
    """Test the biased gyro."""

    def test_no_bias(self):
        """Test the reading equals the true rate without bias or noise."""
        model = GyroModel(bias=np.zeros(3))
        np.testing.assert_array_equal(measure_gyro(model, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_bias_only(self):
        """Test the reading at rest is the bias."""
        model = GyroModel(bias=[0.0, 0.1, -0.2])
        np.testing.assert_array_equal(measure_gyro(model, np.zeros(3)), [0.0, 0.1, -0.2])

    def test_noise_mean(self):
        """Test the empirical mean of noisy readings sits close to Omega + b."""
        model = GyroModel(bias=[0.0, 0.1, -0.2], noise_std=0.01, seed=3)
        omega = np.array([0.5, -0.25, 0.0])
        n = 20_000
        readings = np.array([measure_gyro(model, omega, k) for k in range(n)])
        sigma = 0.01 / np.sqrt(n)
        assert np.all(np.abs(readings.mean(axis=0) - (omega + model.bias)) < 4.0 * sigma)

    def test_noise_keyed_by_sample(self):
        """Test the same sample index repeats and different ones differ."""
        model = GyroModel(bias=np.zeros(3), noise_std=0.1, seed=11)
        np.testing.assert_array_equal(measure_gyro(model, np.zeros(3), 5), measure_gyro(model, np.zeros(3), 5))
        assert not np.array_equal(measure_gyro(model, np.zeros(3), 5), measure_gyro(model, np.zeros(3), 6))

    def test_negative_noise_rejected(self):
        """Test a negative noise level is rejected."""
        with pytest.raises(ValueError, match="noise_std"):
            GyroModel(bias=np.zeros(3), noise_std=-1.0)


class TestMatrixSignal:
    """Test the matrix-valued measurement model."""

    def test_identity_gain(self, rng):
        """Test G = I returns R."""
        R = random_rotation(rng)
        np.testing.assert_array_equal(measure_matrix_signal(MatrixSignalModel(G0=np.eye(3)), R, 0.0), R)

    def test_diagonal_gain(self):
        """Test G = diag(2, 1, 1) at R = I."""
        model = MatrixSignalModel(G0=np.diag([2.0, 1.0, 1.0]))
        np.testing.assert_array_equal(measure_matrix_signal(model, np.eye(3), 0.0), np.diag([2.0, 1.0, 1.0]))

    def test_spectrum_is_rotation_invariant(self, rng):
        """Test lambda_min(A^T A) = lambda_min(G^T G)."""
        for _ in range(50):
            G = rng.standard_normal((3, 3)) + 2.0 * np.eye(3)
            A = measure_matrix_signal(MatrixSignalModel(G0=G), random_rotation(rng), 0.0)
            lam_A = np.linalg.eigvalsh(A.T @ A)[0]
            lam_G = np.linalg.eigvalsh(G.T @ G)[0]
            assert lam_A == pytest.approx(lam_G, abs=1e-10)

    def test_singular_gain_rejected(self):
        """Test construction rejects a singular G."""
        with pytest.raises(SignalModelError, match="invertible"):
            MatrixSignalModel(G0=np.diag([1.0, 1.0, 0.0]))

    def test_time_varying_rate_matches_difference(self):
        """Test G_dot against a central difference of G(t)."""
        model = MatrixSignalModel(
            G0=np.diag([1.5, 1.0, 0.8]), spin=[0.0, 0.1, 0.2], modulation_depth=0.3, modulation_frequency=0.1
        )
        h = 1e-6
        for t in (0.0, 1.3, 7.7):
            G_plus, _ = model.at(t + h)
            G_minus, _ = model.at(t - h)
            _, G_dot = model.at(t)
            np.testing.assert_allclose(G_dot, (G_plus - G_minus) / (2 * h), atol=1e-7)

    def test_spectral_bounds_hold(self):
        """Test the sampled spectrum stays inside ell_min/ell_max."""
        model = MatrixSignalModel(
            G0=np.diag([1.5, 1.0, 0.8]), spin=[0.0, 0.0, 0.2], modulation_depth=0.3, modulation_frequency=0.1
        )
        assert model.check_bounds(np.linspace(0.0, 60.0, 601))
        assert model.ell_min == pytest.approx(0.7**2 * 0.64)
        assert not model.is_constant


class TestBodyVectors:
    """Test body-frame direction measurements."""

    def test_identity_attitude(self):
        """Test R = I gives C = S."""
        scene = VectorScene(S=np.eye(3), W=[1.0, 1.0, 1.0])
        np.testing.assert_array_equal(measure_body_vectors(scene, np.eye(3)), np.eye(3))

    def test_quarter_turn(self):
        """Test s1 = e1 under a quarter turn about e3."""
        scene = VectorScene(S=np.eye(3), W=[1.0, 1.0, 1.0])
        C = measure_body_vectors(scene, QUARTER_TURN_Z)
        np.testing.assert_allclose(C[:, 0], [0.0, -1.0, 0.0], atol=1e-15)

    def test_algebraic_identity(self, rng):
        """Test S C^T = (S S^T) R."""
        S = rng.standard_normal((3, 5))
        scene = VectorScene(S=S, W=np.ones(5))
        R = random_rotation(rng)
        C = measure_body_vectors(scene, R)
        np.testing.assert_allclose(S @ C.T, (S @ S.T) @ R, atol=1e-12)

    def test_noise_keeps_lengths(self, rng):
        """Test noisy directions keep the lengths of the inertial ones."""
        S = rng.standard_normal((3, 4))
        scene = VectorScene(S=S, W=np.ones(4), noise_std=0.05, seed=2)
        C = measure_body_vectors(scene, random_rotation(rng), sample_index=10)
        np.testing.assert_allclose(np.linalg.norm(C, axis=0), np.linalg.norm(S, axis=0), rtol=1e-12)


class TestAugmentRank2:
    """Test completing rank-2 direction sets."""

    def test_two_axes(self):
        """Test [e1 e2] gains e3."""
        np.testing.assert_array_equal(augment_rank2_scene(np.eye(3)[:, :2]), np.eye(3))

    def test_rank3_unchanged(self, rng):
        """Test a rank-3 set comes back unchanged."""
        S = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(augment_rank2_scene(S), S)

    def test_first_independent_pair(self):
        """Test [e1, e1, e2] appends e1 x e2 from the pair (1, 3)."""
        e1, e2 = np.eye(3)[:, 0], np.eye(3)[:, 1]
        out = augment_rank2_scene(np.column_stack([e1, e1, e2]))
        assert out.shape == (3, 4)
        np.testing.assert_array_equal(out[:, 3], [0.0, 0.0, 1.0])

    def test_rank1_rejected(self):
        """Test collinear directions are rejected."""
        S = np.column_stack([[1.0, 0, 0], [2.0, 0, 0]])
        with pytest.raises(SceneError, match="insufficient reference directions"):
            augment_rank2_scene(S)


class TestSceneToSignal:
    """Test (G, A) construction under each weight form."""

    def test_quadratic_identity(self, rng):
        """Test S = W = I with C = R^T gives (I, R)."""
        R = random_rotation(rng)
        scene = VectorScene(S=np.eye(3), W=np.eye(3), form="quadratic")
        G, A = scene_to_signal(scene, R.T)
        np.testing.assert_array_equal(G, np.eye(3))
        np.testing.assert_allclose(A, R, atol=1e-15)

    def test_diagonal_weights(self):
        """Test diagonal weights (1, 2, 3) at R = I."""
        scene = VectorScene(S=np.eye(3), W=[1.0, 2.0, 3.0], form="diagonal")
        G, A = scene_to_signal(scene, np.eye(3))
        np.testing.assert_array_equal(G, np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(A, np.diag([1.0, 2.0, 3.0]))

    def test_linear_substitution_equals_quadratic(self, rng):
        """Test the linear form with S W equals the quadratic form."""
        S = rng.standard_normal((3, 4))
        W = rng.standard_normal((4, 4))
        quad = VectorScene(S=S, W=W, form="quadratic")
        linear = VectorScene(S=S, W=S @ W, form="linear")
        C = measure_body_vectors(quad, random_rotation(rng))
        G_q, A_q = scene_to_signal(quad, C)
        G_l, A_l = scene_to_signal(linear, C)
        np.testing.assert_allclose(G_l, G_q, atol=1e-13)
        np.testing.assert_allclose(A_l, A_q, atol=1e-13)

    def test_degenerate_weights_rejected(self):
        """Test a zero weight that drops the rank is rejected."""
        with pytest.raises(SceneError, match="degenerate weight/scene combination"):
            VectorScene(S=np.eye(3), W=[1.0, 1.0, 0.0])

    def test_gains_reject_nonpositive(self):
        """Test gains must be positive."""
        with pytest.raises(ValueError, match="gains must be positive"):
            Gains(k_P=-1.0, k_I=1.0)
