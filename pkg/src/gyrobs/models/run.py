"""Run configuration and recorded results."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import polars as pl
from numpy.typing import NDArray

from ..utils.matrix_lie import (
    Matrix3,
    Rotation3,
    Vector3,
    as_matrix3,
    as_vector3,
    validate_rotation,
)
from .certificate import DecayReport, LyapunovCertificate
from .signals import AngularVelocityProfile, GyroModel
from .state import Gains
from .variant import ObserverVariant

MAX_STEP = 0.1  # s
DEFAULT_STEP = 0.02  # s, 50 Hz
TAIL_RESIDUAL_TOL = 0.05  # RMS of ln-residuals for a log-linear tail

# Column order of the per-sample CSV
CSV_COLUMNS = (
    "t",
    "e_A_norm",
    "e_b_norm",
    "e_R_norm",
    "e_R_polar_norm",
    "V",
    "V_bound",
)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Everything needed to reproduce one simulated run.

    Initial estimate is ``(A_bar0, b_bar0)`` for the proposed observers and
    ``(R_hat0, b_bar0)`` for the Mahony baseline.
    """

    duration: float  # s
    step: float  # s
    profile: AngularVelocityProfile
    gyro: GyroModel
    variant: ObserverVariant
    gains: Gains
    R0: Rotation3 = field(default_factory=lambda: np.eye(3))
    A_bar0: Matrix3 | None = None
    b_bar0: Vector3 = field(default_factory=lambda: np.zeros(3))
    R_hat0: Rotation3 | None = None
    seed: int = 0
    name: str = "run"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"duration must be > 0 s, got {self.duration}")
        if not 0 < self.step <= MAX_STEP:
            raise ValueError(f"step must be in (0, {MAX_STEP}] s, got {self.step}")
        ratio = self.duration / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError("duration must be an integer multiple of step")
        object.__setattr__(self, "R0", validate_rotation(self.R0))
        object.__setattr__(self, "b_bar0", as_vector3(self.b_bar0))
        if self.A_bar0 is not None:
            object.__setattr__(self, "A_bar0", as_matrix3(self.A_bar0))
        if self.R_hat0 is not None:
            object.__setattr__(self, "R_hat0", validate_rotation(self.R_hat0, tol=1e-6))
        if self.variant.is_mahony and self.R_hat0 is None:
            raise ValueError("mahony_baseline needs an initial rotation R_hat0")
        if not self.variant.is_mahony and self.A_bar0 is None:
            raise ValueError(f"{self.variant.kind} needs an initial estimate A_bar0")

    @property
    def n_steps(self) -> int:
        """Number of integration steps."""
        return int(round(self.duration / self.step))

    @property
    def times(self) -> NDArray[np.float64]:
        """Uniform sample grid ``k * step`` for ``k = 0 .. n_steps``."""
        return np.arange(self.n_steps + 1) * self.step

    @property
    def bias(self) -> Vector3:
        """True gyro bias ``b``."""
        return self.gyro.bias

    def to_dict(self) -> dict[str, Any]:
        """Serialize config to dict (summary echo)."""
        data: dict[str, Any] = {
            "name": self.name,
            "duration": self.duration,
            "step": self.step,
            "seed": self.seed,
            "profile": self.profile.to_dict(),
            "gyro": self.gyro.to_dict(),
            "variant": self.variant.to_dict(),
            "gains": self.gains.to_dict(),
            "R0": self.R0.tolist(),
            "b_bar0": self.b_bar0.tolist(),
        }
        if self.A_bar0 is not None:
            data["A_bar0"] = self.A_bar0.tolist()
        if self.R_hat0 is not None:
            data["R_hat0"] = self.R_hat0.tolist()
        return data


@dataclass(eq=False)
class RunRecord:
    """Sampled series of one run on the uniform grid of its config.

    ``V`` and ``V_bound`` are NaN for variants without a certificate. For the
    Mahony baseline ``A_bar`` holds ``G R_hat`` and ``b_bar`` holds ``b_hat``.
    ``R`` is the projected truth attitude at every sample.
    """

    config: RunConfig
    t: NDArray[np.float64]
    e_A_norm: NDArray[np.float64]
    e_b_norm: NDArray[np.float64]
    e_R_norm: NDArray[np.float64]
    e_R_polar_norm: NDArray[np.float64]
    V: NDArray[np.float64]
    V_bound: NDArray[np.float64]
    A_bar: NDArray[np.float64]
    b_bar: NDArray[np.float64]
    certificate: LyapunovCertificate | None = None
    R: NDArray[np.float64] | None = None  # truth attitude, (n + 1, 3, 3)

    @property
    def error_sum(self) -> NDArray[np.float64]:
        """``|E_A(t)| + |e_b(t)|``."""
        return self.e_A_norm + self.e_b_norm

    @property
    def final_error(self) -> float:
        """``|E_A| + |e_b|`` at the last sample."""
        return float(self.error_sum[-1])

    def to_frame(self) -> pl.DataFrame:
        """Per-sample table in CSV column order; NaN cells become null."""
        return pl.DataFrame(
            [
                pl.Series(name, np.asarray(getattr(self, name)), nan_to_null=True)
                for name in CSV_COLUMNS
            ]
        )


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit ``y ~ C_fit exp(-a_fit t)`` on a window."""

    C_fit: float
    a_fit: float  # 1/s
    t_start: float
    t_end: float
    n_samples: int
    residual: float  # RMS of ln-residuals

    @property
    def log_linear(self) -> bool:
        """Tail is a straight line in log scale to within 0.05 RMS."""
        return self.residual < TAIL_RESIDUAL_TOL

    def to_dict(self) -> dict[str, float | int]:
        """Serialize fit to dict."""
        return {
            "C_fit": self.C_fit,
            "a_fit": self.a_fit,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "n_samples": self.n_samples,
            "residual": self.residual,
            "log_linear": self.log_linear,
        }


@dataclass(frozen=True)
class TrialResult:
    """One Monte Carlo trial."""

    index: int
    seed: int
    converged: bool
    final_error: float
    a_fit: float  # NaN when the tail had too few samples
    max_v_ratio: float
    certificate_passed: bool

    def to_dict(self) -> dict[str, Any]:
        """Serialize trial to dict."""
        return {
            "trial": self.index,
            "seed": self.seed,
            "converged": self.converged,
            "final_error": self.final_error,
            "a_fit": self.a_fit,
            "max_v_ratio": self.max_v_ratio,
            "certificate_passed": self.certificate_passed,
        }


@dataclass
class MonteCarloSummary:
    """Aggregate of a globality study."""

    trials: list[TrialResult]
    init_box: float
    master_seed: int
    certificate: LyapunovCertificate | None
    converged_fraction: float
    a_fit_min: float
    a_fit_median: float
    a_fit_max: float
    certificate_violations: int
    rate_shortfalls: int = 0  # trials with a_fit below the certificate rate
    rate_unfitted: int = 0  # trials whose tail held too few samples to fit

    @property
    def passed(self) -> bool:
        """Every trial converged, honored its certificate and had its rate fitted."""
        return (
            self.converged_fraction == 1.0
            and self.certificate_violations == 0
            and self.rate_shortfalls == 0
            and self.rate_unfitted == 0
        )

    def to_frame(self) -> pl.DataFrame:
        """One row per trial."""
        return pl.DataFrame([trial.to_dict() for trial in self.trials])

    def to_dict(self) -> dict[str, Any]:
        """Serialize summary (without per-trial rows) to dict."""
        return {
            "n": len(self.trials),
            "init_box": self.init_box,
            "master_seed": self.master_seed,
            "converged_fraction": self.converged_fraction,
            "a_fit_min": self.a_fit_min,
            "a_fit_median": self.a_fit_median,
            "a_fit_max": self.a_fit_max,
            "certificate_violations": self.certificate_violations,
            "rate_shortfalls": self.rate_shortfalls,
            "rate_unfitted": self.rate_unfitted,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "passed": self.passed,
        }


@dataclass
class ComparisonResult:
    """Paired proposed/Mahony runs on a shared truth trajectory."""

    proposed: RunRecord
    baseline: RunRecord
    thresholds: tuple[float, ...]
    proposed_times: dict[float, float | None]
    baseline_times: dict[float, float | None]
    proposed_bias_overshoot: float
    baseline_bias_overshoot: float
    decay: DecayReport | None = None

    def winner(self, threshold: float) -> str:
        """``"proposed"``, ``"mahony"``, ``"tie"`` or ``"neither"`` at a threshold."""
        p = self.proposed_times[threshold]
        m = self.baseline_times[threshold]
        if p is None and m is None:
            return "neither"
        if m is None or (p is not None and p < m):
            return "proposed"
        if p is None or m < p:
            return "mahony"
        return "tie"

    def to_dict(self) -> dict[str, Any]:
        """Serialize the ordinal report to dict."""
        return {
            "thresholds": [
                {
                    "threshold": thr,
                    "proposed_time": self.proposed_times[thr],
                    "mahony_time": self.baseline_times[thr],
                    "first": self.winner(thr),
                }
                for thr in self.thresholds
            ],
            "proposed_bias_overshoot": self.proposed_bias_overshoot,
            "mahony_bias_overshoot": self.baseline_bias_overshoot,
            "decay": self.decay.to_dict() if self.decay else None,
        }


@dataclass
class RunAnalysis:
    """A run together with its certificate, decay check and tail-rate fit."""

    record: RunRecord
    certificate: LyapunovCertificate | None
    decay: DecayReport | None
    rate_fit: RateFit | None
    converged: bool
    convergence_tol: float

    @property
    def passed(self) -> bool:
        """Decay check for certified variants, convergence for the rest."""
        if self.decay is not None:
            return self.decay.passed
        return self.converged

    def to_dict(self) -> dict[str, Any]:
        """Serialize run summary (without the series) to dict."""
        record = self.record
        return {
            "config": record.config.to_dict(),
            "samples": len(record.t),
            "final": {
                "e_A_norm": float(record.e_A_norm[-1]),
                "e_b_norm": float(record.e_b_norm[-1]),
                "e_R_norm": float(record.e_R_norm[-1]),
                "e_R_polar_norm": float(record.e_R_polar_norm[-1]),
            },
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "verify_decay": self.decay.to_dict() if self.decay else None,
            "rate_fit": self.rate_fit.to_dict() if self.rate_fit else None,
            "converged": self.converged,
            "convergence_tol": self.convergence_tol,
            "passed": self.passed,
        }
