"""Rigid-body kinematics and sensor models."""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..models.signals import (
    RANK_TOL,
    GyroModel,
    MatrixSignalModel,
    SceneError,
    SceneForm,
    VectorScene,
    weighted_outer,
)
from ..models.state import TrueState
from ..utils.matrix_lie import Matrix3, Vector3, as_vector3, hat

# Independence threshold for a pair of directions, relative to their lengths
INDEPENDENCE_TOL = 1e-9

# Stream tags so gyro and vector noise never share a random stream
_GYRO_STREAM = 0
_VECTOR_STREAM = 1


def attitude_rate(R: Matrix3, omega: Vector3) -> Matrix3:
    """``R hat(Omega)`` for any 3x3 ``R`` (integrator stages leave SO(3))."""
    return R @ hat(omega)


def true_state_derivative(state: TrueState, omega: ArrayLike) -> Matrix3:
    """Attitude derivative ``R_dot = R hat(Omega)``; the bias is constant."""
    return attitude_rate(state.R, as_vector3(omega))


def measure_gyro(model: GyroModel, omega_true: ArrayLike, sample_index: int = 0) -> Vector3:
    """Biased gyro reading ``Omega + b``, plus noise keyed by ``(seed, sample_index)``."""
    reading = as_vector3(omega_true) + model.bias
    if model.noise_std > 0:
        rng = np.random.default_rng([model.seed, _GYRO_STREAM, sample_index])
        reading = reading + model.noise_std * rng.standard_normal(3)
    return reading


def measure_matrix_signal(model: MatrixSignalModel, R: Matrix3, t: float) -> Matrix3:
    """Matrix signal ``A = G(t) R``."""
    G, _ = model.at(t)
    return G @ R


def measure_body_vectors(
    scene: VectorScene, R: Matrix3, sample_index: int | None = None
) -> NDArray[np.float64]:
    """Body-frame directions ``C = R^T S`` (column ``i`` is ``c_i = R^T s_i``).

    With ``scene.noise_std > 0`` and a ``sample_index``, every column gets
    per-axis Gaussian noise and is rescaled back to the length of ``s_i``.
    """
    C = R.T @ scene.S
    if scene.noise_std > 0 and sample_index is not None:
        rng = np.random.default_rng([scene.seed, _VECTOR_STREAM, sample_index])
        noisy = C + scene.noise_std * rng.standard_normal(C.shape)
        lengths = np.linalg.norm(scene.S, axis=0)
        C = noisy * (lengths / np.linalg.norm(noisy, axis=0))
    return C


def augment_rank2_scene(S: ArrayLike) -> NDArray[np.float64]:
    """Complete a rank-2 direction set with ``s_i x s_j``.

    The pair is the first independent one in lexicographic order ``(i, j)``,
    ``i < j``. Rank-3 sets come back unchanged.

    Raises:
        SceneError: If ``rank(S) <= 1`` ("insufficient reference directions")

    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != 3:
        raise SceneError(f"S must be 3 x m, got shape {S.shape}")
    singular = np.linalg.svd(S, compute_uv=False)
    rank = int(np.sum(singular > RANK_TOL * max(singular[0], 1.0)))
    if rank >= 3:
        return S
    if rank <= 1:
        raise SceneError(f"insufficient reference directions: rank(S) = {rank}")

    m = S.shape[1]
    for i in range(m):
        for j in range(i + 1, m):
            si, sj = S[:, i], S[:, j]
            cross = np.cross(si, sj)
            if np.linalg.norm(cross) > INDEPENDENCE_TOL * np.linalg.norm(si) * np.linalg.norm(sj):
                return np.column_stack([S, cross])
    raise SceneError("insufficient reference directions: no independent pair")


def scene_to_signal(
    scene: VectorScene, C: ArrayLike, form: SceneForm | None = None
) -> tuple[Matrix3, Matrix3]:
    """``(G, A)`` of a scene under a weight form.

    linear ``G = W S^T, A = W C^T``; quadratic ``G = S W S^T, A = S W C^T``;
    diagonal ``G = sum w_ii s_i s_i^T, A = sum w_ii s_i c_i^T``.

    Raises:
        SceneError: If ``rank(G) < 3`` ("degenerate weight/scene combination")

    """
    form = form or scene.form
    C = np.asarray(C, dtype=np.float64)
    if C.shape != scene.S.shape:
        raise SceneError(f"C must have shape {scene.S.shape}, got {C.shape}")
    W = scene.W
    expected = (3, scene.m) if form == "linear" else (scene.m, scene.m)
    if W.shape != expected:
        raise SceneError(f"{form} form needs W of shape {expected}, got {W.shape}")
    G = weighted_outer(scene.S, W, scene.S, form)
    if np.linalg.eigvalsh(G.T @ G)[0] <= RANK_TOL:
        raise SceneError("degenerate weight/scene combination: rank(G) < 3")
    return G, weighted_outer(scene.S, W, C, form)

