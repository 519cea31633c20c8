"""Property battery for the so(3) preliminaries and the observer reductions."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..models.signals import SceneError, VectorScene
from ..models.state import Gains, ObserverState
from ..utils.matrix_lie import (
    exp_so3,
    frobenius_inner,
    hat,
    random_rotations,
    skew,
    sym,
    vee,
)
from .dynamics import measure_body_vectors
from .observers import (
    base_derivative,
    diag_form_derivative,
    linear_form_derivative,
    quad_form_derivative,
    time_varying_derivative,
)

logger = logging.getLogger(__name__)

LEMMA_SAMPLES = 1000
ROTATION_PAIRS = 100_000
LEMMA_TOL = 1e-12
REDUCTION_TOL = 1e-13
HALF_TURN_DISTANCE = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one property over its samples."""

    name: str
    statement: str
    passed: bool
    samples: int
    worst: float  # largest violation measure seen (<= 0 or tiny when passing)

    def to_dict(self) -> dict:
        """Serialize result to dict."""
        return {
            "name": self.name,
            "statement": self.statement,
            "passed": self.passed,
            "samples": self.samples,
            "worst": self.worst,
        }


def _scaled(x: float, scale: float) -> float:
    return x / max(1.0, scale)


def lemma_checks(
    seed: int = 0,
    samples: int = LEMMA_SAMPLES,
    pairs: int = ROTATION_PAIRS,
    hat_map: Callable = hat,
    vee_map: Callable = vee,
) -> list[CheckResult]:
    """The seven Frobenius/so(3) preliminaries on random samples.

    ``hat_map`` and ``vee_map`` can be swapped out to make sure the battery
    catches a broken map.
    """
    rng = np.random.default_rng(seed)
    results = []

    R = random_rotations(samples, rng)
    A = rng.standard_normal((samples, 3, 3))
    B = rng.standard_normal((samples, 3, 3))
    worst = 0.0
    for k in range(samples):
        ref = frobenius_inner(A[k], B[k])
        for value in (frobenius_inner(R[k] @ A[k], R[k] @ B[k]), frobenius_inner(A[k] @ R[k], B[k] @ R[k])):
            worst = max(worst, _scaled(abs(value - ref), abs(ref)))
    results.append(
        CheckResult("statement 1", "<RA, RB> = <A, B> = <AR, BR>", worst <= LEMMA_TOL, samples, worst)
    )

    worst = -np.inf
    for k in range(samples):
        eig = np.linalg.eigvalsh(A[k].T @ A[k])
        nB = float(np.sum(B[k] ** 2))
        AB = A[k] @ B[k]
        value = frobenius_inner(AB, AB)
        scale = eig[-1] * nB
        worst = max(worst, _scaled(eig[0] * nB - value, scale), _scaled(value - eig[-1] * nB, scale))
    results.append(
        CheckResult(
            "statement 2",
            "lmin(A^T A)|B|^2 <= <AB, AB> <= lmax(A^T A)|B|^2",
            worst <= LEMMA_TOL,
            samples,
            float(worst),
        )
    )

    x = rng.standard_normal((samples, 3))
    y = rng.standard_normal((samples, 3))
    worst = 0.0
    for k in range(samples):
        ref = 2.0 * float(x[k] @ y[k])
        value = frobenius_inner(hat_map(x[k]), hat_map(y[k]))
        worst = max(worst, _scaled(abs(value - ref), abs(ref)))
    results.append(
        CheckResult("statement 3", "<hat x, hat y> = 2 <x, y>", worst <= LEMMA_TOL, samples, worst)
    )

    worst = 0.0
    for k in range(samples):
        ref = float(np.sum(A[k] ** 2))
        value = float(np.sum(sym(A[k]) ** 2) + np.sum(skew(A[k]) ** 2))
        worst = max(worst, _scaled(abs(value - ref), ref))
    results.append(
        CheckResult("statement 4", "|A|^2 = |Sym A|^2 + |Skew A|^2", worst <= LEMMA_TOL, samples, worst)
    )

    worst = -np.inf
    for k in range(samples):
        bound = float(np.linalg.norm(A[k]) * np.linalg.norm(B[k]))
        worst = max(worst, _scaled(float(np.linalg.norm(A[k] @ B[k])) - bound, bound))
    results.append(
        CheckResult("statement 5", "|AB| <= |A| |B|", worst <= LEMMA_TOL, samples, float(worst))
    )

    worst = 0.0
    for k in range(samples):
        ref = np.cross(x[k], y[k])
        value = vee_map(np.outer(y[k], x[k]) - np.outer(x[k], y[k]))
        worst = max(worst, _scaled(float(np.linalg.norm(value - ref)), float(np.linalg.norm(ref))))
    results.append(
        CheckResult("statement 6", "x cross y = vee(y x^T - x y^T)", worst <= LEMMA_TOL, samples, worst)
    )

    R1 = random_rotations(pairs, rng)
    R2 = random_rotations(pairs, rng)
    distances = np.linalg.norm(R1 - R2, axis=(1, 2))
    attained = float(np.linalg.norm(np.eye(3) - exp_so3([0.0, 0.0, np.pi])))
    excess = float(np.max(distances)) - HALF_TURN_DISTANCE
    gap = abs(attained - HALF_TURN_DISTANCE)
    results.append(
        CheckResult(
            "statement 7",
            "max |R1 - R2| = 2 sqrt(2), attained at a half-turn",
            excess <= 1e-9 and gap <= LEMMA_TOL,
            pairs,
            max(excess, gap),
        )
    )
    return results


def _random_scene(rng: np.random.Generator, m: int, form: str) -> VectorScene:
    while True:
        S = rng.standard_normal((3, m))
        if form == "linear":
            W = rng.standard_normal((3, m))
        elif form == "quadratic":
            W = rng.standard_normal((m, m))
        else:
            W = np.diag(rng.uniform(0.5, 2.0, m))
        try:
            return VectorScene(S=S, W=W, form=form)
        except SceneError:
            continue


def _relative_gap(a, b) -> float:
    (A1, b1), (A2, b2) = a, b
    scale = max(1.0, float(np.linalg.norm(A2)), float(np.linalg.norm(b2)))
    return max(float(np.linalg.norm(A1 - A2)), float(np.linalg.norm(b1 - b2))) / scale


def reduction_checks(seed: int = 0, samples: int = LEMMA_SAMPLES, m: int = 4) -> list[CheckResult]:
    """Vector forms against the base observer under their substitutions.

    The vector forms with ``k_I`` equal the base form with ``2 k_I`` on
    ``(G, A)``; quadratic with diagonal ``W`` equals the diagonal form;
    linear with ``S W`` in place of ``W`` equals quadratic; a time-varying
    observer with ``G_dot = 0`` equals the base form exactly.
    """
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(("linear", "quadratic", "diagonal", "quad_diag", "substitution"), 0.0)
    worst_tv = 0.0

    for _ in range(samples):
        R = random_rotations(1, rng)[0]
        state = ObserverState(A_bar=rng.standard_normal((3, 3)), b_bar=rng.standard_normal(3))
        omega_m = rng.standard_normal(3)
        gains = Gains(k_P=rng.uniform(0.1, 5.0), k_I=rng.uniform(0.1, 5.0))
        doubled = Gains(k_P=gains.k_P, k_I=2.0 * gains.k_I)

        for form, derivative in (
            ("linear", linear_form_derivative),
            ("quadratic", quad_form_derivative),
            ("diagonal", diag_form_derivative),
        ):
            scene = _random_scene(rng, m, form)
            C = measure_body_vectors(scene, R)
            A = scene.G @ R
            got = derivative(state, scene, C, omega_m, gains)
            worst[form] = max(worst[form], _relative_gap(got, base_derivative(state, A, omega_m, doubled)))

        diag_scene = _random_scene(rng, m, "diagonal")
        quad_scene = VectorScene(S=diag_scene.S, W=diag_scene.W, form="quadratic")
        C = measure_body_vectors(diag_scene, R)
        worst["quad_diag"] = max(
            worst["quad_diag"],
            _relative_gap(
                quad_form_derivative(state, quad_scene, C, omega_m, gains),
                diag_form_derivative(state, diag_scene, C, omega_m, gains),
            ),
        )

        quad = _random_scene(rng, m, "quadratic")
        linear = VectorScene(S=quad.S, W=quad.S @ quad.W, form="linear")
        C = measure_body_vectors(quad, R)
        worst["substitution"] = max(
            worst["substitution"],
            _relative_gap(
                linear_form_derivative(state, linear, C, omega_m, gains),
                quad_form_derivative(state, quad, C, omega_m, gains),
            ),
        )

        G = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        A = G @ R
        tv = time_varying_derivative(state, A, omega_m, G, np.zeros((3, 3)), gains)
        base = base_derivative(state, A, omega_m, gains)
        worst_tv = max(worst_tv, _relative_gap(tv, base))

    labels = {
        "linear": "linear form (k_I) = base form (2 k_I) with G = W S^T",
        "quadratic": "quadratic form (k_I) = base form (2 k_I) with G = S W S^T",
        "diagonal": "diagonal form (k_I) = base form (2 k_I) with G = sum w_ii s_i s_i^T",
        "quad_diag": "quadratic form with diagonal W = diagonal form",
        "substitution": "linear form with S W in place of W = quadratic form",
    }
    results = [
        CheckResult(f"reduction {name}", labels[name], value <= REDUCTION_TOL, samples, value)
        for name, value in worst.items()
    ]
    results.append(
        CheckResult(
            "reduction time_varying",
            "time-varying observer with G_dot = 0 = base observer",
            worst_tv == 0.0,
            samples,
            worst_tv,
        )
    )
    return results


def run_selfcheck(seed: int = 0, perturb_hat: bool = False) -> list[CheckResult]:
    """Full battery: seven lemma statements followed by the reduction checks.

    With ``perturb_hat`` the lemma statements run against the sign-flipped
    hat map and its inverse, which statement 6 must reject.
    """
    if perturb_hat:
        results = lemma_checks(seed, hat_map=lambda v: -hat(v), vee_map=lambda M: -vee(M))
    else:
        results = lemma_checks(seed)
    results.extend(reduction_checks(seed))
    failed = [r.name for r in results if not r.passed]
    logger.info("selfcheck: %d checks, %d failed %s", len(results), len(failed), failed or "")
    return results
