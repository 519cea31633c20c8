"""Observer variant selection: a tagged choice plus its measurement payload."""

from dataclasses import dataclass
from typing import Any, Literal

from .signals import MatrixSignalModel, VectorScene

VariantKind = Literal[
    "base",
    "g_identity",
    "inverse",
    "time_varying",
    "linear_form",
    "quad_form",
    "diag_form",
    "mahony_baseline",
]

# Variants fed by a matrix signal A = G R
MATRIX_VARIANTS = ("base", "g_identity", "inverse", "time_varying")
# Variants fed by body-frame vector measurements C = R^T S
SCENE_VARIANTS = ("linear_form", "quad_form", "diag_form", "mahony_baseline")
VARIANT_KINDS: tuple[str, ...] = MATRIX_VARIANTS + SCENE_VARIANTS

# Scene form each vector variant reads its weights with
SCENE_FORM_OF = {
    "linear_form": "linear",
    "quad_form": "quadratic",
    "diag_form": "diagonal",
}


class VariantError(ValueError):
    """Variant and payload do not fit together."""

    pass


@dataclass(frozen=True, eq=False)
class ObserverVariant:
    """Which observer to run and the measurement model it consumes."""

    kind: VariantKind
    scene: VectorScene | None = None
    signal: MatrixSignalModel | None = None

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise VariantError(f"unknown observer variant: {self.kind}")
        if self.kind in SCENE_VARIANTS and self.scene is None:
            raise VariantError(f"{self.kind} needs a vector scene")
        if self.kind in ("base", "inverse", "time_varying") and self.signal is None:
            raise VariantError(f"{self.kind} needs a matrix signal model")
        if self.kind in ("base", "inverse") and not self.signal.is_constant:
            raise VariantError(f"{self.kind} needs a constant G; use time_varying")
        form = SCENE_FORM_OF.get(self.kind)
        if form is not None and self.scene.form != form:
            raise VariantError(f"{self.kind} needs a {form}-form scene, got {self.scene.form}")
        if self.kind == "mahony_baseline" and self.scene.form == "linear":
            raise VariantError("mahony_baseline needs per-direction weights")

    @property
    def is_mahony(self) -> bool:
        """True for the SO(3)-state baseline."""
        return self.kind == "mahony_baseline"

    def to_dict(self) -> dict[str, Any]:
        """Serialize variant to dict."""
        data: dict[str, Any] = {"kind": self.kind}
        if self.scene is not None:
            data["scene"] = self.scene.to_dict()
        if self.signal is not None:
            data["signal"] = self.signal.to_dict()
        return data
