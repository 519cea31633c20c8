"""TOML experiment configuration with strict key checking."""

import tomllib
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from ..models.run import DEFAULT_STEP, RunConfig
from ..models.signals import (
    GyroModel,
    MatrixSignalModel,
    VectorScene,
    profile_from_dict,
)
from ..models.state import Gains
from ..models.variant import (
    MATRIX_VARIANTS,
    SCENE_FORM_OF,
    VARIANT_KINDS,
    ObserverVariant,
)
from ..utils.matrix_lie import (
    Matrix3,
    Vector3,
    as_matrix3,
    as_vector3,
    exp_so3,
    polar_rotation_factor,
)
from .dynamics import augment_rank2_scene
from .harness import DEFAULT_THRESHOLDS
from .observers import nominal_gain

BUNDLED_CONFIGS = (
    "paper_experiment",
    "montecarlo_global",
    "time_varying_demo",
    "inverse_variant_demo",
)

SECTION_KEYS: dict[str, frozenset[str]] = {
    "": frozenset(
        {
            "simulation",
            "scene",
            "observer",
            "gains",
            "initial_conditions",
            "mahony",
            "montecarlo",
            "output",
        }
    ),
    "simulation": frozenset({"duration", "step", "seed", "attitude", "angular_velocity", "gyro"}),
    "simulation.angular_velocity": frozenset(
        {"kind", "omega", "offset", "amplitude", "frequency", "phase", "schedule"}
    ),
    "simulation.angular_velocity.schedule": frozenset({"start", "omega"}),
    "simulation.gyro": frozenset({"bias", "noise_std"}),
    "scene": frozenset(
        {
            "kind",
            "directions",
            "weights",
            "form",
            "noise_std",
            "augment_rank2",
            "G",
            "spin",
            "modulation_depth",
            "modulation_frequency",
        }
    ),
    "observer": frozenset({"variant"}),
    "gains": frozenset({"k_P", "k_I"}),
    "initial_conditions": frozenset({"estimate_rotation", "A_bar", "b_bar"}),
    "mahony": frozenset({"b_hat", "thresholds"}),
    "montecarlo": frozenset({"trials", "init_box", "workers"}),
    "output": frozenset({"directory", "plot_script"}),
}

MATRIX_SCENE_KEYS = frozenset({"G", "spin", "modulation_depth", "modulation_frequency"})
VECTOR_SCENE_KEYS = frozenset({"directions", "weights", "form", "noise_std", "augment_rank2"})


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}" if key else message)


@dataclass
class ExperimentConfig:
    """A parsed configuration document."""

    source: str
    run: RunConfig
    has_mahony: bool = False
    mahony_b_hat: Vector3 | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    trials: int = 100
    init_box: float = 10.0
    workers: int = 1
    output_dir: Path | None = None
    plot_script: bool = False


def _check_keys(table: dict[str, Any], section: str) -> None:
    allowed = SECTION_KEYS[section]
    for key in table:
        if key not in allowed:
            path = f"{section}.{key}" if section else key
            raise ConfigError(path, "unknown key")


def _table(data: dict[str, Any], key: str, section: str) -> dict[str, Any]:
    path = f"{section}.{key}" if section else key
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a table")
    _check_keys(value, path)
    return value


def _float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _vector(value: Any, path: str) -> Vector3:
    try:
        return as_vector3(value)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from e


def _matrix(value: Any, path: str) -> Matrix3:
    try:
        return as_matrix3(value)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from e


def resolve_config_path(source: str | Path) -> tuple[str, str]:
    """Return ``(label, text)`` for a file path or a bundled config name."""
    path = Path(source)
    if path.is_file():
        return str(path), path.read_text(encoding="utf-8")
    name = str(source).removesuffix(".toml")
    if name in BUNDLED_CONFIGS:
        resource = files("gyrobs.configs").joinpath(f"{name}.toml")
        return name, resource.read_text(encoding="utf-8")
    raise ConfigError(
        "config",
        f"no such file or bundled config: {source} (bundled: {', '.join(BUNDLED_CONFIGS)})",
    )


def _parse_profile(sim: dict[str, Any]) -> Any:
    path = "simulation.angular_velocity"
    av = _table(sim, "angular_velocity", "simulation")
    for seg in av.get("schedule", []):
        if not isinstance(seg, dict):
            raise ConfigError(f"{path}.schedule", "expected a list of tables")
        _check_keys(seg, f"{path}.schedule")
    data = {"kind": "constant", "omega": [0.0, 0.0, 0.0], **av}
    try:
        return profile_from_dict(data)
    except KeyError as e:
        raise ConfigError(f"{path}.{e.args[0]}", "missing key") from e
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from e


def _parse_weights(value: Any, m: int) -> NDArray[np.float64]:
    if value is None:
        return np.ones(m)
    try:
        return np.asarray(value, dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise ConfigError("scene.weights", str(e)) from e


def _parse_vector_scene(scene: dict[str, Any], kind: str, seed: int) -> VectorScene:
    stray = set(scene) & MATRIX_SCENE_KEYS
    if stray:
        raise ConfigError(f"scene.{sorted(stray)[0]}", "not allowed for a vector scene")
    if "directions" not in scene:
        raise ConfigError("scene.directions", "missing key")
    try:
        S = np.asarray(scene["directions"], dtype=np.float64).T
    except (ValueError, TypeError) as e:
        raise ConfigError("scene.directions", str(e)) from e
    if S.ndim != 2 or S.shape[0] != 3:
        raise ConfigError("scene.directions", "expected a list of 3-vectors")
    W = _parse_weights(scene.get("weights"), S.shape[1])
    if scene.get("augment_rank2", False):
        augmented = _wrap("scene.directions", augment_rank2_scene, S)
        if augmented.shape[1] > S.shape[1]:
            if W.ndim != 1:
                raise ConfigError("scene.augment_rank2", "needs per-direction weights")
            W = np.append(W, 1.0)
        S = augmented
    default_form = SCENE_FORM_OF.get(kind, "diagonal")
    form = scene.get("form", default_form)
    noise = _float(scene.get("noise_std", 0.0), "scene.noise_std")
    return _wrap("scene", VectorScene, S=S, W=W, form=form, noise_std=noise, seed=seed)


def _parse_matrix_signal(scene: dict[str, Any]) -> MatrixSignalModel:
    stray = set(scene) & VECTOR_SCENE_KEYS
    if stray:
        raise ConfigError(f"scene.{sorted(stray)[0]}", "not allowed for a matrix scene")
    return _wrap(
        "scene",
        MatrixSignalModel,
        G0=_matrix(scene.get("G", np.eye(3).tolist()), "scene.G"),
        spin=_vector(scene.get("spin", [0.0, 0.0, 0.0]), "scene.spin"),
        modulation_depth=_float(scene.get("modulation_depth", 0.0), "scene.modulation_depth"),
        modulation_frequency=_float(
            scene.get("modulation_frequency", 0.0), "scene.modulation_frequency"
        ),
    )


def _wrap(path: str, factory: Any, *args: Any, **kwargs: Any) -> Any:
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from e


def _parse_variant(data: dict[str, Any], seed: int) -> ObserverVariant:
    observer = _table(data, "observer", "")
    kind = observer.get("variant", "base")
    if kind not in VARIANT_KINDS:
        raise ConfigError(
            "observer.variant", f"unknown variant {kind!r} (one of {', '.join(VARIANT_KINDS)})"
        )
    scene = _table(data, "scene", "")
    scene_kind = scene.get("kind")
    if scene_kind not in (None, "vectors", "matrix"):
        raise ConfigError("scene.kind", f"expected 'vectors' or 'matrix', got {scene_kind!r}")

    if kind in MATRIX_VARIANTS:
        if scene_kind == "vectors":
            raise ConfigError("scene.kind", f"{kind} reads a matrix signal, not vectors")
        if kind != "g_identity" and scene_kind is None:
            raise ConfigError("scene", f"{kind} needs a [scene] with kind = 'matrix'")
        signal = _parse_matrix_signal(scene) if scene_kind == "matrix" else None
        return _wrap("observer.variant", ObserverVariant, kind=kind, signal=signal)

    if scene_kind != "vectors":
        raise ConfigError("scene.kind", f"{kind} needs a [scene] with kind = 'vectors'")
    vector_scene = _parse_vector_scene(scene, kind, seed)
    return _wrap("observer.variant", ObserverVariant, kind=kind, scene=vector_scene)


def parse_config(data: dict[str, Any], source: str = "<memory>", seed: int | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a decoded TOML document.

    Args:
        data: Decoded document
        source: Label used in run names and messages
        seed: Overrides ``simulation.seed`` when given

    Raises:
        ConfigError: On unknown keys, wrong types or invalid physics

    """
    _check_keys(data, "")
    sim = _table(data, "simulation", "")
    if "duration" not in sim:
        raise ConfigError("simulation.duration", "missing key")
    run_seed = seed if seed is not None else _int(sim.get("seed", 0), "simulation.seed")
    if run_seed < 0:
        raise ConfigError("simulation.seed", "must be >= 0")

    profile = _parse_profile(sim)
    gyro_table = _table(sim, "gyro", "simulation")
    gyro = _wrap(
        "simulation.gyro",
        GyroModel,
        bias=_vector(gyro_table.get("bias", [0.0, 0.0, 0.0]), "simulation.gyro.bias"),
        noise_std=_float(gyro_table.get("noise_std", 0.0), "simulation.gyro.noise_std"),
        seed=run_seed,
    )
    variant = _parse_variant(data, run_seed)

    gains_table = _table(data, "gains", "")
    for key in ("k_P", "k_I"):
        if key not in gains_table:
            raise ConfigError(f"gains.{key}", "missing key")
    gains = _wrap(
        "gains",
        Gains,
        k_P=_float(gains_table["k_P"], "gains.k_P"),
        k_I=_float(gains_table["k_I"], "gains.k_I"),
    )

    R0 = exp_so3(_vector(sim.get("attitude", [0.0, 0.0, 0.0]), "simulation.attitude"))
    init = _table(data, "initial_conditions", "")
    if "estimate_rotation" in init and "A_bar" in init:
        raise ConfigError("initial_conditions", "give estimate_rotation or A_bar, not both")
    G = nominal_gain(variant)
    if "A_bar" in init:
        A_bar0 = _matrix(init["A_bar"], "initial_conditions.A_bar")
        R_bar0 = None
    else:
        v = _vector(init.get("estimate_rotation", [0.0, 0.0, 0.0]), "initial_conditions.estimate_rotation")
        R_bar0 = R0 @ exp_so3(v)
        A_bar0 = G @ R_bar0
    b_bar0 = _vector(init.get("b_bar", [0.0, 0.0, 0.0]), "initial_conditions.b_bar")

    R_hat0 = None
    if variant.is_mahony:
        if R_bar0 is None:
            R_bar0 = _wrap("initial_conditions.A_bar", polar_rotation_factor, np.linalg.solve(G, A_bar0))
        R_hat0, A_bar0 = R_bar0, None

    name = Path(source).stem if source else "run"
    run = _wrap(
        "simulation",
        RunConfig,
        duration=_float(sim["duration"], "simulation.duration"),
        step=_float(sim.get("step", DEFAULT_STEP), "simulation.step"),
        profile=profile,
        gyro=gyro,
        variant=variant,
        gains=gains,
        R0=R0,
        A_bar0=A_bar0,
        b_bar0=b_bar0,
        R_hat0=R_hat0,
        seed=run_seed,
        name=name,
    )

    config = ExperimentConfig(source=source, run=run)
    if "mahony" in data:
        mahony = _table(data, "mahony", "")
        config.has_mahony = True
        if "b_hat" in mahony:
            config.mahony_b_hat = _vector(mahony["b_hat"], "mahony.b_hat")
        if "thresholds" in mahony:
            raw = mahony["thresholds"]
            if not isinstance(raw, list) or not raw:
                raise ConfigError("mahony.thresholds", "expected a non-empty list")
            thresholds = tuple(_float(x, "mahony.thresholds") for x in raw)
            if any(thr <= 0 for thr in thresholds):
                raise ConfigError("mahony.thresholds", "thresholds must be > 0")
            config.thresholds = thresholds

    mc = _table(data, "montecarlo", "")
    config.trials = _int(mc.get("trials", config.trials), "montecarlo.trials")
    config.init_box = _float(mc.get("init_box", config.init_box), "montecarlo.init_box")
    config.workers = _int(mc.get("workers", config.workers), "montecarlo.workers")
    if config.trials < 1:
        raise ConfigError("montecarlo.trials", "must be >= 1")
    if config.init_box < 0:
        raise ConfigError("montecarlo.init_box", "must be >= 0")
    if config.workers < 1:
        raise ConfigError("montecarlo.workers", "must be >= 1")

    output = _table(data, "output", "")
    if "directory" in output:
        if not isinstance(output["directory"], str):
            raise ConfigError("output.directory", "expected a string")
        config.output_dir = Path(output["directory"])
    plot = output.get("plot_script", False)
    if not isinstance(plot, bool):
        raise ConfigError("output.plot_script", "expected true or false")
    config.plot_script = plot
    return config


def load_config(source: str | Path, seed: int | None = None) -> ExperimentConfig:
    """Read and parse a config file or bundled config name.

    Raises:
        ConfigError: If the document cannot be read or is invalid

    """
    label, text = resolve_config_path(source)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("config", f"invalid TOML in {label}: {e}") from e
    return parse_config(data, source=label, seed=seed)
