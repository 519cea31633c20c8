"""Fixed-step co-integration of truth and observer, metrics, rate fits, comparisons."""

import logging
from dataclasses import replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..models.certificate import ErrorState, LyapunovCertificate
from ..models.run import ComparisonResult, RateFit, RunAnalysis, RunConfig, RunRecord
from ..models.state import MahonyState, ObserverState, TrueState
from ..models.variant import ObserverVariant
from ..utils.matrix_lie import LieAlgebraError, Matrix3, polar_rotation_factor
from .dynamics import (
    attitude_rate,
    measure_body_vectors,
    measure_gyro,
    measure_matrix_signal,
    scene_to_signal,
)
from .lyapunov import certificate_for, lyapunov_value, verify_decay
from .observers import (
    Measurements,
    attitude_estimate,
    mahony_rates,
    nominal_gain,
    proposed_derivative,
)

logger = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-6
TAIL_WINDOW = (1e-10, 1e-2)
FIT_FLOOR = 1e-12
MIN_FIT_SAMPLES = 10
DEFAULT_THRESHOLDS = (0.1, 0.01, 0.001)


class DivergenceError(RuntimeError):
    """Integrated state became non-finite."""

    def __init__(self, step: int, time: float, message: str = "non-finite state"):
        self.step = step
        self.time = time
        super().__init__(f"{message} at step {step} (t = {time:.6g} s)")


class RateFitError(ValueError):
    """Not enough positive samples to fit an exponential."""

    pass


class ComparisonError(ValueError):
    """Paired runs do not share a truth trajectory."""

    pass


def _signal_at(variant: ObserverVariant, t: float) -> tuple[Matrix3, Matrix3]:
    if variant.kind == "g_identity":
        return np.eye(3), np.zeros((3, 3))
    if variant.signal is not None:
        return variant.signal.at(t)
    return variant.scene.G, np.zeros((3, 3))


def _measure(
    config: RunConfig, R: Matrix3, t: float, k: int
) -> tuple[Matrix3, Matrix3, Matrix3, NDArray[np.float64] | None]:
    """``(G, G_dot, A, C)`` seen at ``t``; ``C`` is None without a vector scene."""
    variant = config.variant
    if variant.kind == "g_identity":
        return np.eye(3), np.zeros((3, 3)), R.copy(), None
    if variant.scene is not None:
        C = measure_body_vectors(variant.scene, R, k)
        G, A = scene_to_signal(variant.scene, C)
        return G, np.zeros((3, 3)), A, C
    G, G_dot = variant.signal.at(t)
    return G, G_dot, measure_matrix_signal(variant.signal, R, t), None


def _composite_rates(config: RunConfig, t: float, y: NDArray[np.float64], k: int) -> NDArray[np.float64]:
    """Rates of ``y = (R, estimate)``; measurements at ``t``, noise held over step ``k``."""
    if not np.all(np.isfinite(y)):
        raise DivergenceError(k, t)
    variant = config.variant
    # stage attitudes are off SO(3); attitude_rate takes any 3x3
    R = y[:9].reshape(3, 3)
    omega = config.profile(t)
    omega_m = measure_gyro(config.gyro, omega, k)
    G, G_dot, A, C = _measure(config, R, t, k)

    try:
        if variant.is_mahony:
            est_R, est_b = mahony_rates(
                y[9:18].reshape(3, 3), y[18:], variant.scene, C, omega_m, config.gains
            )
        else:
            meas = Measurements(omega_m=omega_m, A=A, G=G, G_dot=G_dot, C=C)
            est_R, est_b = proposed_derivative(
                variant, ObserverState.unpack(y[9:]), meas, config.gains
            )
    except LieAlgebraError as e:
        # vee() refuses the overflowed (non-finite) innovation
        raise DivergenceError(k, t, "non-finite observer rate") from e
    return np.concatenate([attitude_rate(R, omega).ravel(), est_R.ravel(), est_b])


def _rk4_step(config: RunConfig, t: float, y: NDArray[np.float64], h: float, k: int) -> NDArray[np.float64]:
    k1 = _composite_rates(config, t, y, k)
    k2 = _composite_rates(config, t + 0.5 * h, y + 0.5 * h * k1, k)
    k3 = _composite_rates(config, t + 0.5 * h, y + 0.5 * h * k2, k)
    k4 = _composite_rates(config, t + h, y + h * k3, k)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def error_metrics(truth: TrueState, est: ObserverState, G: Matrix3) -> tuple[float, float, float]:
    """``(|E_A|, |e_b|, |E_R|)`` with ``E_A = G R - A_bar``, ``E_R = R - G^-1 A_bar``."""
    E_A = G @ truth.R - est.A_bar
    E_R = truth.R - np.linalg.solve(G, est.A_bar)
    return (
        float(np.linalg.norm(E_A)),
        float(np.linalg.norm(truth.b - est.b_bar)),
        float(np.linalg.norm(E_R)),
    )


def _initial_state(config: RunConfig) -> NDArray[np.float64]:
    if config.variant.is_mahony:
        est = MahonyState(R_hat=config.R_hat0, b_hat=config.b_bar0).pack()
    else:
        est = ObserverState(A_bar=config.A_bar0, b_bar=config.b_bar0).pack()
    return np.concatenate([config.R0.ravel(), est])


def integrate_run(
    config: RunConfig, certificate: LyapunovCertificate | None | bool = True
) -> RunRecord:
    """Integrate truth and observer together with classical RK4 at a fixed step.

    The truth attitude (and the Mahony attitude) is projected onto SO(3)
    after every step; the proposed observer state never is. ``certificate``
    is a precomputed certificate, True to derive it from the config, or
    False/None to skip the Lyapunov columns.

    Raises:
        DivergenceError: If the state becomes non-finite

    """
    if certificate is True:
        certificate = certificate_for(config)
    elif certificate is False:
        certificate = None

    variant = config.variant
    times = config.times
    h = config.step
    n = config.n_steps
    logger.info("integrating %s (%s): %d steps of %.4g s", config.name, variant.kind, n, h)

    e_A = np.empty(n + 1)
    e_b = np.empty(n + 1)
    e_R = np.empty(n + 1)
    e_polar = np.empty(n + 1)
    V = np.full(n + 1, np.nan)
    A_bars = np.empty((n + 1, 3, 3))
    b_bars = np.empty((n + 1, 3))
    Rs = np.empty((n + 1, 3, 3))

    y = _initial_state(config)
    for k in range(n + 1):
        t = float(times[k])
        if k > 0:
            y = _rk4_step(config, float(times[k - 1]), y, h, k - 1)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(k, t)
            y[:9] = polar_rotation_factor(y[:9].reshape(3, 3)).ravel()
            if variant.is_mahony:
                y[9:18] = polar_rotation_factor(y[9:18].reshape(3, 3)).ravel()

        G, _ = _signal_at(variant, t)
        truth = TrueState(R=y[:9].reshape(3, 3), b=config.bias)
        if variant.is_mahony:
            R_hat = y[9:18].reshape(3, 3)
            est = ObserverState(A_bar=G @ R_hat, b_bar=y[18:])
            polar = float(np.linalg.norm(truth.R - R_hat))
        else:
            est = ObserverState.unpack(y[9:])
            rotation = attitude_estimate(est, G).rotation
            polar = np.nan if rotation is None else float(np.linalg.norm(truth.R - rotation))
        e_A[k], e_b[k], e_R[k] = error_metrics(truth, est, G)
        e_polar[k] = polar
        A_bars[k] = est.A_bar
        b_bars[k] = est.b_bar
        Rs[k] = truth.R
        if certificate is not None:
            err = ErrorState(E_A=G @ truth.R - est.A_bar, e_b=truth.b - est.b_bar)
            V[k] = lyapunov_value(err, G @ truth.R, certificate)

    V_bound = (
        V[0] * np.exp(-certificate.beta * times) if certificate is not None else np.full(n + 1, np.nan)
    )
    logger.info(
        "finished %s: |E_A| + |e_b| = %.3e at t = %.4g s", config.name, e_A[-1] + e_b[-1], times[-1]
    )
    return RunRecord(
        config=config,
        t=times,
        e_A_norm=e_A,
        e_b_norm=e_b,
        e_R_norm=e_R,
        e_R_polar_norm=e_polar,
        V=V,
        V_bound=V_bound,
        A_bar=A_bars,
        b_bar=b_bars,
        certificate=certificate,
        R=Rs,
    )


def fit_exponential_rate(t: ArrayLike, y: ArrayLike) -> RateFit:
    """Least-squares line through ``(t, ln y)``: ``y ~ C_fit exp(-a_fit t)``.

    Samples at or below 1e-12 (and non-finite ones) are left out.

    Raises:
        RateFitError: If fewer than 10 samples remain ("insufficient decay data")

    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = np.isfinite(y) & (y > FIT_FLOOR)
    if int(keep.sum()) < MIN_FIT_SAMPLES:
        raise RateFitError(
            f"insufficient decay data: {int(keep.sum())} usable samples, need {MIN_FIT_SAMPLES}"
        )
    tk, log_y = t[keep], np.log(y[keep])
    slope, intercept = np.polyfit(tk, log_y, 1)
    residual = log_y - (slope * tk + intercept)
    return RateFit(
        C_fit=float(np.exp(intercept)),
        a_fit=float(-slope),
        t_start=float(tk[0]),
        t_end=float(tk[-1]),
        n_samples=int(keep.sum()),
        residual=float(np.sqrt(np.mean(residual**2))),
    )


def tail_window(y: ArrayLike, low: float = TAIL_WINDOW[0], high: float = TAIL_WINDOW[1]) -> slice:
    """Contiguous index range after ``y`` last exceeds ``high`` and before it first drops below ``low``."""
    y = np.asarray(y, dtype=np.float64)
    above = np.flatnonzero(~(y <= high))
    start = int(above[-1]) + 1 if above.size else 0
    below = np.flatnonzero(y[start:] < low)
    stop = start + int(below[0]) if below.size else len(y)
    return slice(start, stop)


def fit_tail_rate(record: RunRecord) -> RateFit:
    """Rate fit of ``|E_A| + |e_b|`` on its tail window.

    Raises:
        RateFitError: If the window holds fewer than 10 samples

    """
    window = tail_window(record.error_sum)
    return fit_exponential_rate(record.t[window], record.error_sum[window])


def time_to_threshold(t: ArrayLike, y: ArrayLike, threshold: float) -> float | None:
    """First sample time after which ``y`` stays below ``threshold``; None if never."""
    t = np.asarray(t, dtype=np.float64)
    below = np.asarray(y, dtype=np.float64) < threshold
    if not below.size or not below[-1]:
        return None
    misses = np.flatnonzero(~below)
    return float(t[0] if not misses.size else t[misses[-1] + 1])


def analyze_run(config: RunConfig, convergence_tol: float = CONVERGENCE_TOL) -> RunAnalysis:
    """Integrate a run and evaluate its certificate, decay and tail rate."""
    record = integrate_run(config)
    decay = verify_decay(record, record.certificate) if record.certificate else None
    try:
        rate_fit = fit_tail_rate(record)
    except RateFitError as e:
        logger.info("no tail-rate fit for %s: %s", config.name, e)
        rate_fit = None
    return RunAnalysis(
        record=record,
        certificate=record.certificate,
        decay=decay,
        rate_fit=rate_fit,
        converged=record.final_error < convergence_tol,
        convergence_tol=convergence_tol,
    )


def mahony_counterpart(config: RunConfig, b_hat0: ArrayLike | None = None) -> RunConfig:
    """Mahony baseline sharing a proposed run's truth, scene and gains.

    ``R_hat(0)`` is the polar rotation factor of ``G^-1 A_bar(0)``;
    ``b_hat(0)`` defaults to ``b_bar(0)``.

    Raises:
        ComparisonError: If the proposed variant has no usable vector scene, or
            ``G^-1 A_bar(0)`` is singular

    """
    variant = config.variant
    if variant.is_mahony:
        raise ComparisonError("config already is the Mahony baseline")
    if variant.scene is None or variant.scene.form == "linear":
        raise ComparisonError("comparison needs a vector scene with per-direction weights")
    G = nominal_gain(variant)
    try:
        R_hat0 = polar_rotation_factor(np.linalg.solve(G, config.A_bar0))
    except LieAlgebraError as e:
        raise ComparisonError("Mahony initialization needs det(G^-1 A_bar(0)) != 0") from e
    return replace(
        config,
        variant=ObserverVariant(kind="mahony_baseline", scene=variant.scene),
        A_bar0=None,
        R_hat0=R_hat0,
        b_bar0=config.b_bar0 if b_hat0 is None else b_hat0,
        name=f"{config.name}-mahony",
    )


def _truth_key(config: RunConfig) -> dict:
    scene = config.variant.scene
    return {
        "duration": config.duration,
        "step": config.step,
        "profile": config.profile.to_dict(),
        "gyro": {**config.gyro.to_dict(), "seed": config.gyro.seed},
        "R0": config.R0.tolist(),
        "scene": scene.to_dict() if scene is not None else None,
        "gains": config.gains.to_dict(),
    }


def compare_observers(
    proposed: RunConfig,
    baseline: RunConfig,
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
) -> ComparisonResult:
    """Run the proposed observer and the Mahony baseline on one truth trajectory.

    The proposed attitude error is the polar-projected ``|R - polar(G^-1 A_bar)|``;
    the baseline error is ``|R - R_hat|``.

    Raises:
        ComparisonError: If the pair does not share truth, scene and gains

    """
    if proposed.variant.is_mahony or not baseline.variant.is_mahony:
        raise ComparisonError("expected a proposed config and a Mahony baseline config")
    key_p, key_m = _truth_key(proposed), _truth_key(baseline)
    mismatched = sorted(name for name in key_p if key_p[name] != key_m[name])
    if mismatched:
        raise ComparisonError(f"mismatched truth configurations: {', '.join(mismatched)}")

    run_p = integrate_run(proposed)
    run_m = integrate_run(baseline, certificate=False)
    decay = verify_decay(run_p, run_p.certificate) if run_p.certificate else None
    return ComparisonResult(
        proposed=run_p,
        baseline=run_m,
        thresholds=tuple(thresholds),
        proposed_times={
            thr: time_to_threshold(run_p.t, run_p.e_R_polar_norm, thr) for thr in thresholds
        },
        baseline_times={
            thr: time_to_threshold(run_m.t, run_m.e_R_norm, thr) for thr in thresholds
        },
        proposed_bias_overshoot=float(np.max(run_p.e_b_norm)),
        baseline_bias_overshoot=float(np.max(run_m.e_b_norm)),
        decay=decay,
    )
