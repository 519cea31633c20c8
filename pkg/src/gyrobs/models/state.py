"""State entities for the rigid body and its observers."""

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..utils.matrix_lie import (
    Matrix3,
    Rotation3,
    Vector3,
    as_matrix3,
    as_vector3,
    validate_rotation,
)


@dataclass(frozen=True)
class Gains:
    """Scalar observer gains ``k_P > 0`` and ``k_I > 0``."""

    k_P: float
    k_I: float

    def __post_init__(self):
        positive = self.k_P > 0 and self.k_I > 0
        if not (positive and np.isfinite(self.k_P) and np.isfinite(self.k_I)):
            raise ValueError(
                f"gains must be positive: k_P={self.k_P}, k_I={self.k_I}"
            )

    def to_dict(self) -> dict[str, float]:
        """Serialize gains to dict."""
        return {"k_P": self.k_P, "k_I": self.k_I}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Gains":
        """Deserialize gains from dict."""
        return cls(k_P=float(data["k_P"]), k_I=float(data["k_I"]))


@dataclass(frozen=True)
class TrueState:
    """Ground truth: attitude ``R`` (body to inertial) and constant gyro bias ``b``."""

    R: Rotation3
    b: Vector3

    def __post_init__(self):
        object.__setattr__(self, "R", validate_rotation(self.R))
        object.__setattr__(self, "b", as_vector3(self.b))


@dataclass(frozen=True)
class ObserverState:
    """Estimate ``(A_bar, b_bar)`` living in R^{3x3} x R^3.

    No manifold constraint: ``A_bar`` is any finite 3x3 matrix.
    """

    A_bar: Matrix3
    b_bar: Vector3

    def __post_init__(self):
        object.__setattr__(self, "A_bar", as_matrix3(self.A_bar))
        object.__setattr__(self, "b_bar", as_vector3(self.b_bar))

    def pack(self) -> np.ndarray:
        """Flatten to a 12-vector ``(A_bar row-major, b_bar)``."""
        return np.concatenate([self.A_bar.ravel(), self.b_bar])

    @classmethod
    def unpack(cls, y: np.ndarray) -> "ObserverState":
        """Inverse of :meth:`pack`."""
        return cls(A_bar=y[:9].reshape(3, 3), b_bar=y[9:12])


@dataclass(frozen=True)
class MahonyState:
    """Estimate ``(R_hat, b_hat)`` of the SO(3)-based baseline filter."""

    R_hat: Matrix3
    b_hat: Vector3

    def __post_init__(self):
        object.__setattr__(self, "R_hat", as_matrix3(self.R_hat))
        object.__setattr__(self, "b_hat", as_vector3(self.b_hat))

    def pack(self) -> np.ndarray:
        """Flatten to a 12-vector ``(R_hat row-major, b_hat)``."""
        return np.concatenate([self.R_hat.ravel(), self.b_hat])

    @classmethod
    def unpack(cls, y: np.ndarray) -> "MahonyState":
        """Inverse of :meth:`pack`."""
        return cls(R_hat=y[:9].reshape(3, 3), b_hat=y[9:12])
