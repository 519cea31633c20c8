"""Lyapunov certificate: feasible epsilon, quadratic forms, rates, prefactor and checks.

The certificate holds for the base observer ``(G, A = G R)`` with constant
``G``. The vector forms are certified through :func:`certificate_gains`.
"""

import logging

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from ..models.certificate import (
    CertificateAudit,
    DecayReport,
    ErrorState,
    LyapunovCertificate,
    SignalBounds,
)
from ..models.run import RunConfig, RunRecord
from ..models.state import Gains
from ..utils.matrix_lie import (
    DET_TOL,
    Matrix3,
    Vector3,
    frobenius_inner,
    hat,
    random_rotations,
    skew,
    vee,
)
from .observers import certificate_gains, nominal_gain

logger = logging.getLogger(__name__)

DECAY_SLACK = 1e-3
DECAY_FLOOR = 1e-14
AUDIT_TOL = 1e-9
SANDWICH_TOL = 1e-12


class CertificateError(ValueError):
    """No valid certificate for the requested constants."""

    pass


def compute_epsilon(G: Matrix3, gains: Gains, bounds: SignalBounds) -> float:
    """Half the smaller of the two strict upper bounds on epsilon.

    ``bound1 = 1 / (|G| sqrt(k_I))`` keeps ``V1`` positive definite and
    ``bound2 = 4 k_P l / (|G|^2 (4 k_I l + (k_P + 3 sqrt(2) B)^2))`` keeps
    ``V3`` positive definite, with ``l = lambda_min(G^T G)``.

    Raises:
        CertificateError: If ``G`` is singular

    """
    G = np.asarray(G, dtype=np.float64)
    if abs(np.linalg.det(G)) <= DET_TOL:
        raise CertificateError("certificate requires invertible G")
    norm_G = float(np.linalg.norm(G))
    lam = float(np.linalg.eigvalsh(G.T @ G)[0])
    bound1 = 1.0 / (norm_G * np.sqrt(gains.k_I))
    bound2 = (4.0 * gains.k_P * lam) / (
        norm_G**2 * (4.0 * gains.k_I * lam + (gains.k_P + 3.0 * np.sqrt(2.0) * bounds.B) ** 2)
    )
    return 0.5 * min(bound1, bound2)


def form_matrices(
    epsilon: float, norm_G: float, lambda_min: float, gains: Gains, B: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Symmetric 2x2 coefficient matrices ``M1, M2, M3`` of ``V1, V2, V3``.

    ``Vk(x1, x2) = [x1 x2] Mk [x1 x2]^T`` with ``x1 = |E_A|``, ``x2 = |e_b|``.
    """
    cross = np.sqrt(2.0) * epsilon * norm_G / 2.0
    M1 = np.array([[0.5, -cross], [-cross, 1.0 / gains.k_I]])
    M2 = np.array([[0.5, cross], [cross, 1.0 / gains.k_I]])
    off = -epsilon * (np.sqrt(2.0) * gains.k_P + 6.0 * B) * norm_G / 2.0
    M3 = np.array(
        [
            [gains.k_P - epsilon * gains.k_I * norm_G**2, off],
            [off, 2.0 * epsilon * lambda_min],
        ]
    )
    return M1, M2, M3


def _cert_matrices(cert: LyapunovCertificate):
    return form_matrices(
        cert.epsilon, cert.norm_G, cert.lambda_min_GtG, cert.gains, cert.bounds.B
    )


def quadratic_forms(nEA: float, neb: float, cert: LyapunovCertificate) -> tuple[float, float, float]:
    """``(V1, V2, V3)`` at ``(|E_A|, |e_b|)``."""
    x = np.array([nEA, neb], dtype=np.float64)
    M1, M2, M3 = _cert_matrices(cert)
    return float(x @ M1 @ x), float(x @ M2 @ x), float(x @ M3 @ x)


def certificate_rates(
    M1: NDArray[np.float64], M2: NDArray[np.float64], M3: NDArray[np.float64]
) -> tuple[float, float]:
    """``alpha = lambda_max(M2) / lambda_min(M1)``, ``beta = lambda_min(M3) / lambda_max(M2)``.

    Raises:
        CertificateError: If ``M1`` or ``M3`` is not positive definite

    """
    l1 = np.linalg.eigvalsh(M1)
    l2 = np.linalg.eigvalsh(M2)
    l3 = np.linalg.eigvalsh(M3)
    if l1[0] <= 0 or l3[0] <= 0:
        raise CertificateError(
            f"infeasible ε: lambda_min(M1) = {l1[0]:.3e}, lambda_min(M3) = {l3[0]:.3e}"
        )
    return float(l2[-1] / l1[0]), float(l3[0] / l2[-1])


def norm_equivalence(M1: NDArray[np.float64]) -> tuple[float, float]:
    """``(c_lo, c_hi)`` with ``c_lo (x1 + x2) <= sqrt(V1) <= c_hi (x1 + x2)`` for ``x >= 0``.

    Both are the extremes of ``sqrt(V1)`` on the simplex ``x1 + x2 = 1``.
    ``V1`` is convex there, so the maximum sits at a vertex.

    Raises:
        CertificateError: If ``M1`` is not positive definite

    """
    if np.linalg.eigvalsh(M1)[0] <= 0:
        raise CertificateError("infeasible ε: V1 is not positive definite")

    def on_simplex(s: float) -> float:
        x = np.array([1.0 - s, s])
        return float(x @ M1 @ x)

    vertices = (float(M1[0, 0]), float(M1[1, 1]))
    result = minimize_scalar(on_simplex, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    lowest = min(float(result.fun), *vertices)
    return float(np.sqrt(lowest)), float(np.sqrt(max(vertices)))


def prefactor_C(M1: NDArray[np.float64], alpha: float) -> float:
    """``C = sqrt(alpha) c_hi / c_lo`` from norm equivalence with the 1-norm."""
    c_lo, c_hi = norm_equivalence(M1)
    return float(np.sqrt(alpha) * c_hi / c_lo)


def build_certificate(G: Matrix3, gains: Gains, bounds: SignalBounds) -> LyapunovCertificate:
    """Assemble every certificate constant for a constant ``G``."""
    G = np.asarray(G, dtype=np.float64)
    epsilon = compute_epsilon(G, gains, bounds)
    norm_G = float(np.linalg.norm(G))
    lam = float(np.linalg.eigvalsh(G.T @ G)[0])
    M1, M2, M3 = form_matrices(epsilon, norm_G, lam, gains, bounds.B)
    alpha, beta = certificate_rates(M1, M2, M3)
    cert = LyapunovCertificate(
        epsilon=epsilon,
        alpha=alpha,
        beta=beta,
        a=beta / 2.0,
        C=prefactor_C(M1, alpha),
        lambda_min_GtG=lam,
        norm_G=norm_G,
        gains=gains,
        bounds=bounds,
    )
    logger.debug(
        "certificate: eps=%.6g alpha=%.6g beta=%.6g a=%.6g C=%.6g",
        cert.epsilon,
        cert.alpha,
        cert.beta,
        cert.a,
        cert.C,
    )
    return cert


def signal_bounds(config: RunConfig) -> SignalBounds:
    """``B_Omega`` from the profile, ``B_b`` from the true bias."""
    return SignalBounds(
        B_Omega=config.profile.bound(), B_b=float(np.linalg.norm(config.bias))
    )


def certificate_for(config: RunConfig) -> LyapunovCertificate | None:
    """Certificate of a run's base-equivalent observer; None for uncertified variants."""
    gains = certificate_gains(config.variant.kind, config.gains)
    if gains is None:
        return None
    return build_certificate(nominal_gain(config.variant), gains, signal_bounds(config))


def lyapunov_value(err: ErrorState, A: Matrix3, cert: LyapunovCertificate) -> float:
    """``V = 1/2 |E_A|^2 + (1/k_I) |e_b|^2 + eps <E_A, A hat(e_b)>``.

    Raises:
        CertificateError: If ``|A|`` differs from ``|G|`` by more than 1e-6

    """
    A = np.asarray(A, dtype=np.float64)
    if abs(np.linalg.norm(A) - cert.norm_G) > 1e-6 * max(1.0, cert.norm_G):
        raise CertificateError("A is not a signal G R of the certified G")
    return (
        0.5 * float(np.sum(err.E_A * err.E_A))
        + float(err.e_b @ err.e_b) / cert.gains.k_I
        + cert.epsilon * frobenius_inner(err.E_A, A @ hat(err.e_b))
    )


def error_rates(
    err: ErrorState, A: Matrix3, omega: Vector3, b: Vector3, gains: Gains
) -> tuple[Matrix3, Vector3]:
    """Exact error dynamics of the base observer.

    ``E_A_dot = E_A (hat(Omega) + hat(b)) - A hat(e_b) - k_P E_A`` and
    ``e_b_dot = k_I vee(Skew(A^T E_A))``.
    """
    E_dot = err.E_A @ (hat(omega) + hat(b)) - A @ hat(err.e_b) - gains.k_P * err.E_A
    e_dot = gains.k_I * vee(skew(A.T @ err.E_A))
    return E_dot, e_dot


def lyapunov_rate(
    err: ErrorState, A: Matrix3, omega: Vector3, b: Vector3, cert: LyapunovCertificate
) -> float:
    """Analytic ``dV/dt`` along the error dynamics with ``A_dot = A hat(Omega)``."""
    A = np.asarray(A, dtype=np.float64)
    E_dot, e_dot = error_rates(err, A, omega, b, cert.gains)
    A_dot = A @ hat(omega)
    return (
        frobenius_inner(err.E_A, E_dot)
        + 2.0 * float(err.e_b @ e_dot) / cert.gains.k_I
        + cert.epsilon
        * (
            frobenius_inner(E_dot, A @ hat(err.e_b))
            + frobenius_inner(err.E_A, A_dot @ hat(err.e_b))
            + frobenius_inner(err.E_A, A @ hat(e_dot))
        )
    )


def _ball_samples(rng: np.random.Generator, n: int, radius: float) -> NDArray[np.float64]:
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.uniform(0.0, 1.0, size=(n, 1)))


def audit_certificate(
    cert: LyapunovCertificate, G: Matrix3, n: int = 10_000, seed: int = 0
) -> CertificateAudit:
    """Check ``dV/dt <= -beta V + 1e-9`` and the sandwich at random states.

    Errors have entries of unit scale, ``|Omega| <= B_Omega`` and
    ``|b| <= B_b``; attitudes are Haar distributed.
    """
    rng = np.random.default_rng(seed)
    G = np.asarray(G, dtype=np.float64)
    rotations = random_rotations(n, rng)
    omegas = _ball_samples(rng, n, cert.bounds.B_Omega)
    biases = _ball_samples(rng, n, cert.bounds.B_b)
    E_samples = rng.uniform(-1.0, 1.0, size=(n, 3, 3))
    e_samples = rng.uniform(-1.0, 1.0, size=(n, 3))

    max_excess = -np.inf
    rate_violations = 0
    sandwich_violations = 0
    for k in range(n):
        A = G @ rotations[k]
        err = ErrorState(E_A=E_samples[k], e_b=e_samples[k])
        V = lyapunov_value(err, A, cert)
        V1, V2, _ = quadratic_forms(*err.norms, cert)
        slack = SANDWICH_TOL * max(1.0, V2)
        if V < V1 - slack or V > V2 + slack:
            sandwich_violations += 1
        excess = lyapunov_rate(err, A, omegas[k], biases[k], cert) + cert.beta * V
        max_excess = max(max_excess, excess)
        if excess > AUDIT_TOL:
            rate_violations += 1

    audit = CertificateAudit(
        samples=n,
        seed=seed,
        max_rate_excess=float(max_excess),
        sandwich_violations=sandwich_violations,
        rate_violations=rate_violations,
        tolerance=AUDIT_TOL,
    )
    logger.info(
        "certificate audit: %d samples, max dV/dt + beta V = %.3e", n, audit.max_rate_excess
    )
    return audit


def verify_decay(
    run: RunRecord, cert: LyapunovCertificate, delta: float = DECAY_SLACK
) -> DecayReport:
    """Check ``V(t) <= V(0) e^{-beta t}``, the stepwise decay and the error bound.

    The stepwise check is ``V(t + h) <= V(t) e^{-beta h}`` between neighboring
    samples. The error bound is ``|E_A| + |e_b| <= C (|E_A(0)| + |e_b(0)|) e^{-a t}``.
    All three use the multiplicative slack ``1 + delta``; values below 1e-14 are
    at the floating-point floor and are not compared.
    """
    t = np.asarray(run.t)
    V = np.asarray(run.V)
    error = run.error_sum
    report = DecayReport(passed=True, delta=delta, samples_checked=len(t))
    if len(t) == 0 or not np.isfinite(V[0]):
        report.passed = False
        report.notes.append("run carries no Lyapunov values")
        return report

    v_bound = V[0] * np.exp(-cert.beta * t)
    e_bound = cert.C * error[0] * np.exp(-cert.a * t)
    step_bound = np.concatenate([[np.inf], V[:-1] * np.exp(-cert.beta * np.diff(t))])

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ratio = np.where(v_bound > DECAY_FLOOR, V / v_bound, 0.0)
        e_ratio = np.where(e_bound > DECAY_FLOOR, error / e_bound, 0.0)
        s_ratio = np.where(np.isfinite(step_bound) & (V > DECAY_FLOOR), V / step_bound, 0.0)
    report.max_v_ratio = float(np.max(v_ratio))
    report.max_norm_ratio = float(np.max(e_ratio))
    report.max_step_ratio = float(np.max(s_ratio))

    v_bad = (V > DECAY_FLOOR) & (V > v_bound * (1.0 + delta))
    s_bad = (V > DECAY_FLOOR) & (V > step_bound * (1.0 + delta))
    e_bad = (error > DECAY_FLOOR) & (error > e_bound * (1.0 + delta))
    bad = np.flatnonzero(v_bad | s_bad | e_bad)
    if bad.size:
        k = int(bad[0])
        report.passed = False
        report.first_violation_index = k
        report.first_violation_time = float(t[k])
        if v_bad[k]:
            report.violation_kind = "lyapunov"
        elif s_bad[k]:
            report.violation_kind = "stepwise"
        else:
            report.violation_kind = "error_bound"
        logger.info("decay violation (%s) at t=%.3f", report.violation_kind, t[k])
    return report
