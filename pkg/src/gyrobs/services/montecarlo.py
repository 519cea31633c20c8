"""Monte Carlo globality study over random initial estimates."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from ..models.certificate import LyapunovCertificate
from ..models.run import MonteCarloSummary, RunConfig, TrialResult
from .harness import CONVERGENCE_TOL, RateFitError, fit_tail_rate, integrate_run
from .lyapunov import certificate_for, verify_decay

logger = logging.getLogger(__name__)

BIAS_BOX = 1.0  # rad/s


def trial_config(base: RunConfig, index: int, seed: int, init_box: float) -> RunConfig:
    """Base config with ``A_bar(0)`` entries in ``[-init_box, init_box]`` and ``b_bar(0)`` in ``[-1, 1]^3``."""
    rng = np.random.default_rng(seed)
    return replace(
        base,
        A_bar0=rng.uniform(-init_box, init_box, size=(3, 3)),
        b_bar0=rng.uniform(-BIAS_BOX, BIAS_BOX, size=3),
        gyro=replace(base.gyro, seed=seed),
        seed=seed,
        name=f"{base.name}-trial{index:04d}",
    )


def _run_trial(args: tuple[RunConfig, int, int, LyapunovCertificate | None]) -> TrialResult:
    """Worker entry point; module level so the process pool can pickle it."""
    config, index, seed, certificate = args
    record = integrate_run(config, certificate=certificate or False)
    try:
        a_fit = fit_tail_rate(record).a_fit
    except RateFitError:
        a_fit = float("nan")
    if certificate is not None:
        report = verify_decay(record, certificate)
        passed, max_v_ratio = report.passed, report.max_v_ratio
    else:
        passed, max_v_ratio = True, float("nan")
    return TrialResult(
        index=index,
        seed=seed,
        converged=record.final_error < CONVERGENCE_TOL,
        final_error=record.final_error,
        a_fit=a_fit,
        max_v_ratio=max_v_ratio,
        certificate_passed=passed,
    )


def monte_carlo_global(
    base: RunConfig,
    n: int,
    init_box: float,
    master_seed: int = 0,
    workers: int = 1,
) -> MonteCarloSummary:
    """Run ``n`` independent trials and reduce them in trial order.

    Per-trial seeds are spawned from ``SeedSequence(master_seed)``, so the
    summary does not depend on ``workers``.

    Raises:
        ValueError: If ``n < 1`` or ``init_box < 0``, or the base runs the Mahony baseline

    """
    if n < 1:
        raise ValueError(f"trials must be >= 1, got {n}")
    if init_box < 0:
        raise ValueError(f"init_box must be >= 0, got {init_box}")
    if base.variant.is_mahony:
        raise ValueError("globality study needs a proposed-observer variant")

    certificate = certificate_for(base)
    children = np.random.SeedSequence(master_seed).spawn(n)
    seeds = [int(child.generate_state(1)[0]) for child in children]
    jobs = [
        (trial_config(base, i, seed, init_box), i, seed, certificate)
        for i, seed in enumerate(seeds)
    ]
    logger.info("Monte Carlo: %d trials, init_box=%g, workers=%d", n, init_box, workers)

    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            trials = list(executor.map(_run_trial, jobs))
    else:
        trials = [_run_trial(job) for job in jobs]

    rates = np.array([trial.a_fit for trial in trials])
    finite = rates[np.isfinite(rates)]
    if finite.size:
        a_min, a_median, a_max = (
            float(np.min(finite)),
            float(np.median(finite)),
            float(np.max(finite)),
        )
    else:
        a_min = a_median = a_max = float("nan")

    shortfalls = 0
    if certificate is not None:
        shortfalls = sum(
            1 for trial in trials if np.isfinite(trial.a_fit) and trial.a_fit < certificate.a
        )
    summary = MonteCarloSummary(
        trials=trials,
        init_box=init_box,
        master_seed=master_seed,
        certificate=certificate,
        converged_fraction=sum(trial.converged for trial in trials) / n,
        a_fit_min=a_min,
        a_fit_median=a_median,
        a_fit_max=a_max,
        certificate_violations=sum(not trial.certificate_passed for trial in trials),
        rate_shortfalls=shortfalls,
        rate_unfitted=int(rates.size - finite.size),
    )
    logger.info(
        "Monte Carlo done: converged %.0f%%, %d certificate violations, %d unfitted rates",
        100.0 * summary.converged_fraction,
        summary.certificate_violations,
        summary.rate_unfitted,
    )
    return summary
