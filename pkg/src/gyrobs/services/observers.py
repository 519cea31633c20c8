"""Observer family in R^{3x3} x R^3 and the SO(3) Mahony baseline.

Every observer is a pure state-derivative function; the harness integrates
them uniformly. Proposed-observer states are never projected onto SO(3).
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..models.signals import VectorScene, weighted_outer
from ..models.state import Gains, MahonyState, ObserverState
from ..models.variant import ObserverVariant
from ..utils.matrix_lie import (
    DET_TOL,
    Matrix3,
    Rotation3,
    Vector3,
    hat,
    polar_rotation_factor,
    skew,
    vee,
)

MAHONY_MANIFOLD_TOL = 1e-6


class ObserverError(ValueError):
    """Observer evaluated outside its domain."""

    pass


@dataclass(frozen=True, eq=False)
class Measurements:
    """Sensor values seen by an observer at one evaluation time.

    ``A`` is the matrix signal (scene variants fill it with their own ``A``),
    ``C`` the body-frame directions, ``G``/``G_dot`` the signal gain and its
    rate.
    """

    omega_m: Vector3
    A: Matrix3
    G: Matrix3
    G_dot: Matrix3 | None = None
    C: NDArray[np.float64] | None = None


class AttitudeEstimate(tuple):
    """``(raw, rotation)`` pair; ``rotation`` is None when degenerate."""

    __slots__ = ()

    def __new__(cls, raw: Matrix3, rotation: Rotation3 | None):
        return super().__new__(cls, (raw, rotation))

    @property
    def raw(self) -> Matrix3:
        return self[0]

    @property
    def rotation(self) -> Rotation3 | None:
        return self[1]

    @property
    def degenerate(self) -> bool:
        return self[1] is None


def _a_bar_rate(
    A_bar: Matrix3, A: Matrix3, omega_m: Vector3, b_bar: Vector3, k_P: float
) -> Matrix3:
    return A_bar @ hat(omega_m) - A @ hat(b_bar) + k_P * (A - A_bar)


def base_derivative(
    state: ObserverState, A: Matrix3, omega_m: Vector3, gains: Gains
) -> tuple[Matrix3, Vector3]:
    """Proposed observer on the matrix signal ``A = G R``.

    ``A_bar_dot = A_bar hat(Omega_m) - A hat(b_bar) + k_P (A - A_bar)`` and
    ``b_bar_dot = k_I vee(Skew(A^T A_bar))``. Defined for every state.
    """
    A_dot = _a_bar_rate(state.A_bar, A, omega_m, state.b_bar, gains.k_P)
    b_dot = gains.k_I * vee(skew(A.T @ state.A_bar))
    return A_dot, b_dot


def inverse_variant_derivative(
    state: ObserverState, A: Matrix3, omega_m: Vector3, gains: Gains
) -> tuple[Matrix3, Vector3]:
    """Base observer with ``b_bar_dot = k_I vee(Skew(A^-1 A_bar))``.

    Raises:
        ObserverError: If ``|det A| <= 1e-12``

    """
    if abs(np.linalg.det(A)) <= DET_TOL:
        raise ObserverError("inverse variant requires invertible A")
    A_dot = _a_bar_rate(state.A_bar, A, omega_m, state.b_bar, gains.k_P)
    b_dot = gains.k_I * vee(skew(np.linalg.solve(A, state.A_bar)))
    return A_dot, b_dot


def time_varying_derivative(
    state: ObserverState,
    A: Matrix3,
    omega_m: Vector3,
    G: Matrix3,
    G_dot: Matrix3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Base observer plus the feed-forward ``G_dot G^-1 A`` for a moving ``G(t)``.

    Raises:
        ObserverError: If ``|det G| <= 1e-12``

    """
    if abs(np.linalg.det(G)) <= DET_TOL:
        raise ObserverError("time-varying variant requires invertible G")
    A_dot, b_dot = base_derivative(state, A, omega_m, gains)
    return A_dot + G_dot @ np.linalg.solve(G, A), b_dot


def _require_weights(scene: VectorScene, linear: bool) -> None:
    expected = (3, scene.m) if linear else (scene.m, scene.m)
    if scene.W.shape != expected:
        raise ObserverError(f"weights of shape {expected} required, got {scene.W.shape}")


def linear_form_derivative(
    state: ObserverState,
    scene: VectorScene,
    C: NDArray[np.float64],
    omega_m: Vector3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Vector-measurement observer with ``A = W C^T``, ``W`` of shape 3xm.

    ``b_bar_dot = -k_I sum_i c_i x (A_bar^T w_i)``; this ``k_I`` stands for
    half the base-form ``k_I``.
    """
    _require_weights(scene, linear=True)
    A = weighted_outer(scene.S, scene.W, C, "linear")
    A_dot = _a_bar_rate(state.A_bar, A, omega_m, state.b_bar, gains.k_P)
    D = state.A_bar.T @ scene.W
    b_dot = -gains.k_I * np.cross(C.T, D.T).sum(axis=0)
    return A_dot, b_dot


def quad_form_derivative(
    state: ObserverState,
    scene: VectorScene,
    C: NDArray[np.float64],
    omega_m: Vector3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Vector-measurement observer with ``A = S W C^T``, ``W`` of shape mxm.

    ``b_bar_dot = -k_I sum_i sum_j w_ij c_j x (A_bar^T s_i)``.
    """
    _require_weights(scene, linear=False)
    A = weighted_outer(scene.S, scene.W, C, "quadratic")
    A_dot = _a_bar_rate(state.A_bar, A, omega_m, state.b_bar, gains.k_P)
    E = state.A_bar.T @ scene.S
    # pairs[i, j] = c_j x (A_bar^T s_i)
    pairs = np.cross(C.T[np.newaxis, :, :], E.T[:, np.newaxis, :])
    b_dot = -gains.k_I * np.einsum("ij,ijk->k", scene.W, pairs)
    return A_dot, b_dot


def diag_form_derivative(
    state: ObserverState,
    scene: VectorScene,
    C: NDArray[np.float64],
    omega_m: Vector3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Vector-measurement observer with diagonal weights.

    ``A = sum w_ii s_i c_i^T`` and ``b_bar_dot = -k_I sum_i w_ii c_i x (A_bar^T s_i)``.
    """
    _require_weights(scene, linear=False)
    w = np.diag(scene.W)
    if np.any(scene.W != np.diag(w)):
        raise ObserverError("diagonal form requires a diagonal W")
    A = weighted_outer(scene.S, scene.W, C, "diagonal")
    A_dot = _a_bar_rate(state.A_bar, A, omega_m, state.b_bar, gains.k_P)
    E = state.A_bar.T @ scene.S
    b_dot = -gains.k_I * (w[:, np.newaxis] * np.cross(C.T, E.T)).sum(axis=0)
    return A_dot, b_dot


def mahony_innovation(
    R_hat: Matrix3, scene: VectorScene, C: NDArray[np.float64]
) -> Vector3:
    """``sigma = sum_i w_ii c_i x (R_hat^T s_i)``."""
    w = scene.weights_diagonal
    predicted = R_hat.T @ scene.S
    return (w[:, np.newaxis] * np.cross(C.T, predicted.T)).sum(axis=0)


def mahony_rates(
    R_hat: Matrix3,
    b_hat: Vector3,
    scene: VectorScene,
    C: NDArray[np.float64],
    omega_m: Vector3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Explicit complementary filter rates, without the manifold check."""
    sigma = mahony_innovation(R_hat, scene, C)
    R_dot = R_hat @ hat(omega_m - b_hat + gains.k_P * sigma)
    return R_dot, -gains.k_I * sigma


def mahony_derivative(
    state: MahonyState,
    scene: VectorScene,
    C: NDArray[np.float64],
    omega_m: Vector3,
    gains: Gains,
) -> tuple[Matrix3, Vector3]:
    """Explicit complementary filter with bias on SO(3).

    ``R_hat_dot = R_hat hat(Omega_m - b_hat + k_P sigma)`` and
    ``b_hat_dot = -k_I sigma``.

    Raises:
        ObserverError: If ``R_hat`` is off SO(3) by more than 1e-6

    """
    drift = np.linalg.norm(state.R_hat.T @ state.R_hat - np.eye(3))
    if drift > MAHONY_MANIFOLD_TOL or np.linalg.det(state.R_hat) <= 0:
        raise ObserverError(f"Mahony state off SO(3): |R^T R - I| = {drift:.3e}")
    return mahony_rates(state.R_hat, state.b_hat, scene, C, omega_m, gains)


def attitude_estimate(state: ObserverState, G: Matrix3) -> AttitudeEstimate:
    """Raw attitude estimate ``G^-1 A_bar`` and its polar rotation factor.

    The rotation is None (degenerate) when ``det(G^-1 A_bar) <= 1e-12``.

    Raises:
        ObserverError: If ``G`` is singular

    """
    if abs(np.linalg.det(G)) <= DET_TOL:
        raise ObserverError("attitude estimate requires invertible G")
    raw = np.linalg.solve(G, state.A_bar)
    if np.linalg.det(raw) <= DET_TOL:
        return AttitudeEstimate(raw, None)
    return AttitudeEstimate(raw, polar_rotation_factor(raw))


def proposed_derivative(
    variant: ObserverVariant, state: ObserverState, meas: Measurements, gains: Gains
) -> tuple[Matrix3, Vector3]:
    """Dispatch a proposed-observer variant on its measurements."""
    kind = variant.kind
    if kind in ("base", "g_identity"):
        return base_derivative(state, meas.A, meas.omega_m, gains)
    elif kind == "inverse":
        return inverse_variant_derivative(state, meas.A, meas.omega_m, gains)
    elif kind == "time_varying":
        G_dot = meas.G_dot if meas.G_dot is not None else np.zeros((3, 3))
        return time_varying_derivative(state, meas.A, meas.omega_m, meas.G, G_dot, gains)
    elif kind == "linear_form":
        return linear_form_derivative(state, variant.scene, meas.C, meas.omega_m, gains)
    elif kind == "quad_form":
        return quad_form_derivative(state, variant.scene, meas.C, meas.omega_m, gains)
    elif kind == "diag_form":
        return diag_form_derivative(state, variant.scene, meas.C, meas.omega_m, gains)
    raise ObserverError(f"{kind} is not a proposed-observer variant")


def certificate_gains(kind: str, gains: Gains) -> Gains | None:
    """Base-form gains realized by a variant, or None if it has no certificate.

    The vector forms print ``k_I`` in place of the base ``k_I / 2``, so they
    run the base observer with ``2 k_I``.
    """
    if kind in ("base", "g_identity"):
        return gains
    if kind in ("linear_form", "quad_form", "diag_form"):
        return Gains(k_P=gains.k_P, k_I=2.0 * gains.k_I)
    return None


def nominal_gain(variant: ObserverVariant) -> Matrix3:
    """``G`` at ``t = 0`` for a variant: its signal ``G0``, the scene ``G`` or ``I``."""
    if variant.kind == "g_identity":
        return np.eye(3)
    if variant.scene is not None:
        return variant.scene.G
    if variant.signal is not None:
        return variant.signal.G0
    return np.eye(3)
