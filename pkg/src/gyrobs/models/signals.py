"""Signal models: angular velocity profiles, gyro, vector scenes, matrix signals."""

from dataclasses import dataclass, field
from typing import Any, ClassVar, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.matrix_lie import (
    DET_TOL,
    Matrix3,
    Vector3,
    as_matrix3,
    as_vector3,
    exp_so3,
    hat,
)

SceneForm = Literal["linear", "quadratic", "diagonal"]
SCENE_FORMS: tuple[SceneForm, ...] = ("linear", "quadratic", "diagonal")

# lambda_min(G^T G) threshold below which a scene is considered rank deficient
RANK_TOL = 1e-9


class SceneError(ValueError):
    """Invalid reference-direction scene or weight combination."""

    pass


class SignalModelError(ValueError):
    """Invalid matrix-valued signal model."""

    pass


@dataclass(frozen=True, eq=False)
class ConstantProfile:
    """Constant body angular velocity (rad/s)."""

    omega: Vector3
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        object.__setattr__(self, "omega", as_vector3(self.omega))

    def __call__(self, t: float) -> Vector3:
        return self.omega

    def bound(self) -> float:
        """Supremum of ``|Omega(t)|``."""
        return float(np.linalg.norm(self.omega))

    def to_dict(self) -> dict[str, Any]:
        """Serialize profile to dict."""
        return {"kind": self.kind, "omega": self.omega.tolist()}


@dataclass(frozen=True, eq=False)
class SinusoidalProfile:
    """Per-axis ``offset + amplitude * sin(2 pi frequency t + phase)``.

    Amplitudes in rad/s, frequencies in Hz, phases in rad.
    """

    offset: Vector3
    amplitude: Vector3
    frequency: Vector3
    phase: Vector3
    kind: ClassVar[str] = "sinusoidal"

    def __post_init__(self):
        for name in ("offset", "amplitude", "frequency", "phase"):
            object.__setattr__(self, name, as_vector3(getattr(self, name)))

    def __call__(self, t: float) -> Vector3:
        return self.offset + self.amplitude * np.sin(
            2.0 * np.pi * self.frequency * t + self.phase
        )

    def bound(self) -> float:
        """Upper bound on ``|Omega(t)|`` from per-axis extremes."""
        return float(np.linalg.norm(np.abs(self.offset) + np.abs(self.amplitude)))

    def to_dict(self) -> dict[str, Any]:
        """Serialize profile to dict."""
        return {
            "kind": self.kind,
            "offset": self.offset.tolist(),
            "amplitude": self.amplitude.tolist(),
            "frequency": self.frequency.tolist(),
            "phase": self.phase.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PiecewiseProfile:
    """Piecewise-constant schedule; segment ``k`` holds from ``starts[k]``."""

    starts: tuple[float, ...]
    omegas: NDArray[np.float64]
    kind: ClassVar[str] = "piecewise"

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=np.float64)
        starts = tuple(float(s) for s in self.starts)
        if omegas.ndim != 2 or omegas.shape[1] != 3 or len(starts) != len(omegas):
            raise ValueError("schedule needs one 3-vector per segment start")
        if not starts or starts[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:], strict=False)):
            raise ValueError("schedule starts must be strictly increasing")
        if not np.all(np.isfinite(omegas)):
            raise ValueError("schedule has non-finite angular velocity")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "omegas", omegas)

    def __call__(self, t: float) -> Vector3:
        index = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.omegas[max(index, 0)]

    def bound(self) -> float:
        """Largest segment speed."""
        return float(np.max(np.linalg.norm(self.omegas, axis=1)))

    def to_dict(self) -> dict[str, Any]:
        """Serialize profile to dict."""
        return {
            "kind": self.kind,
            "schedule": [
                {"start": s, "omega": w.tolist()}
                for s, w in zip(self.starts, self.omegas, strict=True)
            ],
        }


AngularVelocityProfile = ConstantProfile | SinusoidalProfile | PiecewiseProfile

PROFILE_KINDS = ("constant", "sinusoidal", "piecewise")


def profile_from_dict(data: dict[str, Any]) -> AngularVelocityProfile:
    """Deserialize an angular velocity profile from dict."""
    kind = data["kind"]
    if kind == "constant":
        return ConstantProfile(omega=data["omega"])
    if kind == "sinusoidal":
        return SinusoidalProfile(
            offset=data.get("offset", [0.0, 0.0, 0.0]),
            amplitude=data["amplitude"],
            frequency=data["frequency"],
            phase=data.get("phase", [0.0, 0.0, 0.0]),
        )
    if kind == "piecewise":
        schedule = data["schedule"]
        return PiecewiseProfile(
            starts=tuple(seg["start"] for seg in schedule),
            omegas=np.array([seg["omega"] for seg in schedule], dtype=np.float64),
        )
    raise ValueError(f"unknown angular velocity kind: {kind}")


@dataclass(frozen=True, eq=False)
class GyroModel:
    """Biased rate gyro: ``Omega_m = Omega + b (+ Gaussian noise)``."""

    bias: Vector3
    noise_std: float = 0.0  # rad/s, per axis
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bias", as_vector3(self.bias))
        if not (self.noise_std >= 0 and np.isfinite(self.noise_std)):
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")

    def to_dict(self) -> dict[str, Any]:
        """Serialize gyro model to dict."""
        return {"bias": self.bias.tolist(), "noise_std": self.noise_std}


def weighted_outer(
    S: NDArray[np.float64], W: NDArray[np.float64], X: NDArray[np.float64], form: SceneForm
) -> Matrix3:
    """Combine inertial directions ``S`` with 3xm columns ``X`` under weights ``W``.

    ``X = S`` gives ``G`` and ``X = C`` gives ``A``:
    linear ``W X^T``, quadratic ``S W X^T``, diagonal ``sum_i w_ii s_i x_i^T``.
    """
    if form == "linear":
        return W @ X.T
    if form == "quadratic":
        return S @ W @ X.T
    if form == "diagonal":
        return (S * np.diag(W)) @ X.T
    raise SceneError(f"unknown scene form: {form}")


@dataclass(frozen=True, eq=False)
class VectorScene:
    """Known inertial directions ``s_i`` (columns of ``S``) and their weights.

    ``W`` is 3xm for the linear form and mxm for the quadratic and diagonal
    forms; a length-m sequence is read as the diagonal of ``W``.
    """

    S: NDArray[np.float64]
    W: NDArray[np.float64]
    form: SceneForm = "diagonal"
    noise_std: float = 0.0
    seed: int = 0
    G: Matrix3 = field(init=False)

    def __post_init__(self):
        S = np.asarray(self.S, dtype=np.float64)
        W = np.asarray(self.W, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != 3 or S.shape[1] < 1:
            raise SceneError(f"S must be 3 x m, got shape {S.shape}")
        if not np.all(np.isfinite(S)) or not np.all(np.isfinite(W)):
            raise SceneError("scene has non-finite entries")
        m = S.shape[1]
        if W.ndim == 1:
            W = np.diag(W)
        if self.form not in SCENE_FORMS:
            raise SceneError(f"unknown scene form: {self.form}")
        expected = (3, m) if self.form == "linear" else (m, m)
        if W.shape != expected:
            raise SceneError(f"{self.form} form needs W of shape {expected}, got {W.shape}")
        if self.form == "diagonal" and np.any(W != np.diag(np.diag(W))):
            raise SceneError("diagonal form needs a diagonal W")
        if not (self.noise_std >= 0 and np.isfinite(self.noise_std)):
            raise SceneError(f"noise_std must be >= 0, got {self.noise_std}")

        G = weighted_outer(S, W, S, self.form)
        if np.linalg.eigvalsh(G.T @ G)[0] <= RANK_TOL:
            raise SceneError("degenerate weight/scene combination: rank(G) < 3")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "G", G)

    @property
    def m(self) -> int:
        """Number of reference directions."""
        return self.S.shape[1]

    @property
    def weights_diagonal(self) -> NDArray[np.float64]:
        """Per-direction weights ``w_ii`` (square-W forms only)."""
        if self.form == "linear":
            raise SceneError("linear-form weights have no per-direction diagonal")
        return np.diag(self.W).copy()

    def to_dict(self) -> dict[str, Any]:
        """Serialize scene to dict."""
        return {
            "directions": self.S.T.tolist(),
            "weights": self.W.tolist(),
            "form": self.form,
            "noise_std": self.noise_std,
        }


@dataclass(frozen=True, eq=False)
class MatrixSignalModel:
    """Matrix signal ``A = G(t) R`` with ``G(t) = m(t) exp(t hat(spin)) G0``.

    ``m(t) = 1 + depth * sin(2 pi frequency t)``. With zero spin and depth the
    model is the constant case ``G(t) = G0``. Rotation leaves the spectrum of
    ``G^T G`` unchanged, so ``ell_min``/``ell_max`` follow from ``G0`` and the
    modulation depth alone.
    """

    G0: Matrix3
    spin: Vector3 = field(default_factory=lambda: np.zeros(3))
    modulation_depth: float = 0.0
    modulation_frequency: float = 0.0  # Hz

    def __post_init__(self):
        G0 = as_matrix3(self.G0)
        if abs(np.linalg.det(G0)) <= DET_TOL:
            raise SignalModelError("G must be invertible (|det G| <= 1e-12)")
        if not abs(self.modulation_depth) < 1.0:
            raise SignalModelError(
                f"modulation_depth must satisfy |depth| < 1, got {self.modulation_depth}"
            )
        object.__setattr__(self, "G0", G0)
        object.__setattr__(self, "spin", as_vector3(self.spin))

    @property
    def is_constant(self) -> bool:
        """True when ``G`` does not depend on time."""
        return self.modulation_depth == 0.0 and not np.any(self.spin)

    def at(self, t: float) -> tuple[Matrix3, Matrix3]:
        """Return ``(G(t), G_dot(t))``."""
        if self.is_constant:
            return self.G0, np.zeros((3, 3))
        phase = 2.0 * np.pi * self.modulation_frequency * t
        scale = 1.0 + self.modulation_depth * np.sin(phase)
        scale_dot = (
            self.modulation_depth * 2.0 * np.pi * self.modulation_frequency * np.cos(phase)
        )
        Q = exp_so3(t * self.spin) @ self.G0
        return scale * Q, scale_dot * Q + scale * (hat(self.spin) @ Q)

    @property
    def ell_min(self) -> float:
        """Lower bound on ``lambda_min(G(t)^T G(t))``."""
        lam = np.linalg.eigvalsh(self.G0.T @ self.G0)[0]
        return float((1.0 - abs(self.modulation_depth)) ** 2 * lam)

    @property
    def ell_max(self) -> float:
        """Upper bound on ``lambda_max(G(t)^T G(t))``."""
        lam = np.linalg.eigvalsh(self.G0.T @ self.G0)[-1]
        return float((1.0 + abs(self.modulation_depth)) ** 2 * lam)

    def check_bounds(self, times: ArrayLike, rtol: float = 1e-9) -> bool:
        """Check ``ell_min <= eig(G^T G) <= ell_max`` at every sampled time."""
        for t in np.asarray(times, dtype=np.float64):
            G, _ = self.at(float(t))
            eig = np.linalg.eigvalsh(G.T @ G)
            if eig[0] < self.ell_min * (1 - rtol) or eig[-1] > self.ell_max * (1 + rtol):
                return False
        return True

    def to_dict(self) -> dict[str, Any]:
        """Serialize signal model to dict."""
        return {
            "G": self.G0.tolist(),
            "spin": self.spin.tolist(),
            "modulation_depth": self.modulation_depth,
            "modulation_frequency": self.modulation_frequency,
        }
