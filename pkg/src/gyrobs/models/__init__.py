"""Gyrobs data models."""

from .certificate import (
    CertificateAudit,
    DecayReport,
    ErrorState,
    LyapunovCertificate,
    SignalBounds,
)
from .run import (
    ComparisonResult,
    MonteCarloSummary,
    RateFit,
    RunAnalysis,
    RunConfig,
    RunRecord,
    TrialResult,
)
from .signals import (
    AngularVelocityProfile,
    ConstantProfile,
    GyroModel,
    MatrixSignalModel,
    PiecewiseProfile,
    SceneError,
    SignalModelError,
    SinusoidalProfile,
    VectorScene,
)
from .state import Gains, MahonyState, ObserverState, TrueState
from .variant import VARIANT_KINDS, ObserverVariant, VariantError

__all__ = [
    "AngularVelocityProfile",
    "CertificateAudit",
    "ComparisonResult",
    "ConstantProfile",
    "DecayReport",
    "ErrorState",
    "Gains",
    "GyroModel",
    "LyapunovCertificate",
    "MahonyState",
    "MatrixSignalModel",
    "MonteCarloSummary",
    "ObserverState",
    "ObserverVariant",
    "PiecewiseProfile",
    "RateFit",
    "RunAnalysis",
    "RunConfig",
    "RunRecord",
    "SceneError",
    "SignalBounds",
    "SignalModelError",
    "SinusoidalProfile",
    "TrialResult",
    "TrueState",
    "VARIANT_KINDS",
    "VariantError",
    "VectorScene",
]
