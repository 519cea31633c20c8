"""Lyapunov certificate entities."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..utils.matrix_lie import Matrix3, Vector3, as_matrix3, as_vector3
from .state import Gains


@dataclass(frozen=True)
class SignalBounds:
    """Bounds ``B_Omega >= sup |Omega(t)|`` and ``B_b >= |b|``."""

    B_Omega: float
    B_b: float

    def __post_init__(self):
        if self.B_Omega < 0 or self.B_b < 0:
            raise ValueError(f"signal bounds must be >= 0: {self.B_Omega}, {self.B_b}")

    @property
    def B(self) -> float:
        """``max(B_Omega, B_b)``."""
        return max(self.B_Omega, self.B_b)

    def to_dict(self) -> dict[str, float]:
        """Serialize bounds to dict."""
        return {"B_Omega": self.B_Omega, "B_b": self.B_b, "B": self.B}


@dataclass(frozen=True)
class LyapunovCertificate:
    """Constants realizing the exponential estimate.

    ``|E_A(t)| + |e_b(t)| <= C (|E_A(0)| + |e_b(0)|) exp(-a t)`` and
    ``V(t) <= V(0) exp(-beta t)`` for the base observer with these gains.
    """

    epsilon: float
    alpha: float
    beta: float
    a: float
    C: float
    lambda_min_GtG: float
    norm_G: float
    gains: Gains
    bounds: SignalBounds

    def to_dict(self) -> dict[str, Any]:
        """Serialize certificate to dict."""
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": self.beta,
            "a": self.a,
            "C": self.C,
            "lambda_min_GtG": self.lambda_min_GtG,
            "norm_G": self.norm_G,
            "gains": self.gains.to_dict(),
            "bounds": self.bounds.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class ErrorState:
    """Estimation error ``E_A = A - A_bar`` and ``e_b = b - b_bar``."""

    E_A: Matrix3
    e_b: Vector3

    def __post_init__(self):
        object.__setattr__(self, "E_A", as_matrix3(self.E_A))
        object.__setattr__(self, "e_b", as_vector3(self.e_b))

    @property
    def norms(self) -> tuple[float, float]:
        """``(|E_A|, |e_b|)``."""
        return float(np.linalg.norm(self.E_A)), float(np.linalg.norm(self.e_b))


@dataclass
class DecayReport:
    """Outcome of checking a run against its certificate."""

    passed: bool
    delta: float
    samples_checked: int = 0
    max_v_ratio: float = 0.0  # max V(t) / (V(0) exp(-beta t))
    max_norm_ratio: float = 0.0  # max error sum / C (...) exp(-a t)
    max_step_ratio: float = 0.0  # max V(t + h) / (V(t) exp(-beta h))
    first_violation_index: int | None = None
    first_violation_time: float | None = None
    violation_kind: str | None = None  # "lyapunov" | "stepwise" | "error_bound"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Serialize report to dict."""
        return {
            "passed": self.passed,
            "delta": self.delta,
            "samples_checked": self.samples_checked,
            "max_v_ratio": self.max_v_ratio,
            "max_norm_ratio": self.max_norm_ratio,
            "max_step_ratio": self.max_step_ratio,
            "first_violation_index": self.first_violation_index,
            "first_violation_time": self.first_violation_time,
            "violation_kind": self.violation_kind,
            "notes": list(self.notes),
        }


@dataclass
class CertificateAudit:
    """Random-state audit of ``dV/dt <= -beta V`` and ``V1 <= V <= V2``."""

    samples: int
    seed: int
    max_rate_excess: float  # max of dV/dt + beta V
    sandwich_violations: int
    rate_violations: int
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        """No sample broke either inequality."""
        return self.rate_violations == 0 and self.sandwich_violations == 0

    def to_dict(self) -> dict[str, Any]:
        """Serialize audit to dict."""
        return {
            "samples": self.samples,
            "seed": self.seed,
            "max_rate_excess": self.max_rate_excess,
            "rate_violations": self.rate_violations,
            "sandwich_violations": self.sandwich_violations,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }
