#!/usr/bin/env python3
"""Gyrobs CLI entry point.

Batch runs of the attitude/gyro-bias observers: single runs, proposed vs
Mahony comparisons, Monte Carlo globality studies, the property self-check
and certificate dumps.

Exit codes: 0 pass, 1 verification failure, 2 invalid configuration,
3 divergence.
"""

import logging
from pathlib import Path

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from .services.config_loader import ConfigError, ExperimentConfig, load_config
from .services.export import ExportService, resolve_output_dir
from .services.harness import (
    ComparisonError,
    DivergenceError,
    analyze_run,
    compare_observers,
    mahony_counterpart,
)
from .services.lyapunov import CertificateError, audit_certificate, certificate_for
from .services.montecarlo import monte_carlo_global
from .services.observers import ObserverError, nominal_gain
from .services.selfcheck import run_selfcheck

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

app = typer.Typer(
    help="Gyrobs - global attitude and gyro-bias observer experiments",
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)

ConfigOption = typer.Option(
    ..., "--config", "-c", help="Config file or bundled name (e.g. paper_experiment)"
)
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides config and GYROBS_OUT_DIR)")
SeedOption = typer.Option(None, "--seed", min=0, help="Override simulation.seed")


def _status(passed: bool) -> str:
    return "[green]PASS[/green]" if passed else "[red]FAIL[/red]"


def _fail(code: int, message: str) -> typer.Exit:
    err_console.print(f"[red]error:[/red] {escape(message)}")
    return typer.Exit(code=code)


def _load(config: str, seed: int | None) -> ExperimentConfig:
    try:
        return load_config(config, seed=seed)
    except ConfigError as e:
        raise _fail(EXIT_CONFIG, f"invalid configuration: {e}") from e


def _out_dir(flag: Path | None, experiment: ExperimentConfig) -> Path:
    out = resolve_output_dir(flag, experiment.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level"),
) -> None:
    """Simulate and certify the observers."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


@app.command()
def run(
    config: str = ConfigOption,
    out: Path | None = OutOption,
    seed: int | None = SeedOption,
) -> None:
    """Integrate one run and check it against its certificate.

    Writes <name>.csv and <name>_summary.json. Exits 0 when the decay check
    passes (or, for uncertified variants, when the run converges).
    """
    experiment = _load(config, seed)
    run_config = experiment.run
    try:
        analysis = analyze_run(run_config)
    except DivergenceError as e:
        raise _fail(EXIT_DIVERGED, str(e)) from e
    except (ObserverError, CertificateError) as e:
        raise _fail(EXIT_FAILED, str(e)) from e

    out_dir = _out_dir(out, experiment)
    export = ExportService()
    csv_path = export.write_run_csv(analysis.record, out_dir / f"{run_config.name}.csv")
    export.write_summary(analysis.to_dict(), out_dir / f"{run_config.name}_summary.json")
    if experiment.plot_script:
        export.export_plot_script(
            [{"label": run_config.variant.kind, "filename": csv_path.name, "attitude_column": "e_R_polar_norm"}],
            out_dir / f"plot_{run_config.name}.py",
            title=run_config.name,
        )

    table = Table(title=f"{run_config.name} ({run_config.variant.kind})")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    record = analysis.record
    table.add_row("samples", str(len(record.t)))
    table.add_row("final |E_A|", f"{record.e_A_norm[-1]:.3e}")
    table.add_row("final |e_b|", f"{record.e_b_norm[-1]:.3e}")
    table.add_row("final polar attitude error", f"{record.e_R_polar_norm[-1]:.3e}")
    if analysis.certificate is not None:
        cert = analysis.certificate
        table.add_row("certificate a / C", f"{cert.a:.4g} / {cert.C:.4g}")
        table.add_row("verify_decay", _status(analysis.decay.passed))
    if analysis.rate_fit is not None:
        fit = analysis.rate_fit
        table.add_row("fitted rate a_fit", f"{fit.a_fit:.4g}")
        shape = "log-linear" if fit.log_linear else "curved"
        table.add_row("tail residual (ln)", f"{fit.residual:.3g} ({shape})")
    table.add_row("converged", _status(analysis.converged))
    console.print(table)
    console.print(f"wrote {csv_path}")
    raise typer.Exit(code=EXIT_OK if analysis.passed else EXIT_FAILED)


@app.command()
def compare(
    config: str = ConfigOption,
    out: Path | None = OutOption,
    seed: int | None = SeedOption,
) -> None:
    """Run the proposed observer against the Mahony baseline on one truth.

    Needs a [mahony] section. Writes <name>_proposed.csv, <name>_mahony.csv
    and <name>_comparison.json.
    """
    experiment = _load(config, seed)
    if not experiment.has_mahony:
        raise _fail(EXIT_CONFIG, f"invalid configuration: {ConfigError('mahony', 'missing section')}")
    proposed = experiment.run
    try:
        baseline = mahony_counterpart(proposed, experiment.mahony_b_hat)
        result = compare_observers(proposed, baseline, experiment.thresholds)
    except ComparisonError as e:
        raise _fail(EXIT_CONFIG, str(e)) from e
    except DivergenceError as e:
        raise _fail(EXIT_DIVERGED, str(e)) from e

    out_dir = _out_dir(out, experiment)
    export = ExportService()
    p_csv = export.write_run_csv(result.proposed, out_dir / f"{proposed.name}_proposed.csv")
    m_csv = export.write_run_csv(result.baseline, out_dir / f"{proposed.name}_mahony.csv")
    export.write_summary(
        {"config": proposed.to_dict(), "comparison": result.to_dict()},
        out_dir / f"{proposed.name}_comparison.json",
    )
    if experiment.plot_script:
        export.export_plot_script(
            [
                {"label": "proposed", "filename": p_csv.name, "attitude_column": "e_R_polar_norm"},
                {"label": "mahony", "filename": m_csv.name, "attitude_column": "e_R_norm"},
            ],
            out_dir / f"plot_{proposed.name}_comparison.py",
            title=f"{proposed.name}: proposed vs Mahony",
        )

    table = Table(title=f"{proposed.name}: time to attitude-error threshold [s]")
    table.add_column("threshold", justify="right")
    table.add_column("proposed", justify="right")
    table.add_column("mahony", justify="right")
    table.add_column("first")
    for thr in result.thresholds:
        p, m = result.proposed_times[thr], result.baseline_times[thr]
        table.add_row(
            f"{thr:g}",
            "-" if p is None else f"{p:.2f}",
            "-" if m is None else f"{m:.2f}",
            result.winner(thr),
        )
    console.print(table)
    console.print(
        f"bias overshoot max|b - b_est|: proposed {result.proposed_bias_overshoot:.4g}, "
        f"mahony {result.baseline_bias_overshoot:.4g}"
    )
    passed = result.decay is None or result.decay.passed
    raise typer.Exit(code=EXIT_OK if passed else EXIT_FAILED)


@app.command()
def montecarlo(
    config: str = ConfigOption,
    out: Path | None = OutOption,
    seed: int | None = SeedOption,
    trials: int | None = typer.Option(None, "--trials", "-n", help="Number of trials"),
    init_box: float | None = typer.Option(None, "--init-box", help="A_bar(0) entries in [-box, box]"),
    workers: int | None = typer.Option(None, "--workers", "-j", help="Worker processes"),
) -> None:
    """Globality study from random initial estimates.

    Writes <name>_montecarlo.csv (one row per trial) and a JSON summary.
    Exits 1 if any trial fails to converge or breaks its certificate.
    """
    experiment = _load(config, None)
    n = experiment.trials if trials is None else trials
    box = experiment.init_box if init_box is None else init_box
    jobs = experiment.workers if workers is None else workers
    if n < 1:
        raise _fail(EXIT_CONFIG, f"invalid configuration: {ConfigError('trials', f'must be >= 1, got {n}')}")
    if box < 0:
        raise _fail(EXIT_CONFIG, f"invalid configuration: {ConfigError('init_box', 'must be >= 0')}")
    if jobs < 1:
        raise _fail(EXIT_CONFIG, f"invalid configuration: {ConfigError('workers', 'must be >= 1')}")
    master_seed = experiment.run.seed if seed is None else seed
    try:
        summary = monte_carlo_global(experiment.run, n, box, master_seed=master_seed, workers=jobs)
    except ValueError as e:
        raise _fail(EXIT_CONFIG, str(e)) from e
    except DivergenceError as e:
        raise _fail(EXIT_DIVERGED, str(e)) from e

    name = experiment.run.name
    out_dir = _out_dir(out, experiment)
    export = ExportService()
    csv_path = export.write_montecarlo_csv(summary, out_dir / f"{name}_montecarlo.csv")
    export.write_summary(
        {"config": experiment.run.to_dict(), "montecarlo": summary.to_dict()},
        out_dir / f"{name}_montecarlo_summary.json",
    )

    table = Table(title=f"{name}: {n} trials, init_box={box:g}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row("converged fraction", f"{summary.converged_fraction:.3f}")
    table.add_row(
        "a_fit min / median / max",
        f"{summary.a_fit_min:.4g} / {summary.a_fit_median:.4g} / {summary.a_fit_max:.4g}",
    )
    if summary.certificate is not None:
        table.add_row("certificate a", f"{summary.certificate.a:.4g}")
    table.add_row("certificate violations", str(summary.certificate_violations))
    table.add_row("rate shortfalls / unfitted", f"{summary.rate_shortfalls} / {summary.rate_unfitted}")
    table.add_row("result", _status(summary.passed))
    console.print(table)
    console.print(f"wrote {csv_path}")
    raise typer.Exit(code=EXIT_OK if summary.passed else EXIT_FAILED)


@app.command()
def selfcheck(
    seed: int = typer.Option(0, "--seed", min=0, help="Sampling seed"),
    perturb_hat: bool = typer.Option(
        False, "--perturb-hat", hidden=True, help="Run against a sign-flipped hat map"
    ),
) -> None:
    """Check the so(3)/Frobenius preliminaries and the observer reductions."""
    results = run_selfcheck(seed=seed, perturb_hat=perturb_hat)
    table = Table(title="selfcheck")
    table.add_column("check")
    table.add_column("property")
    table.add_column("samples", justify="right")
    table.add_column("worst", justify="right")
    table.add_column("result")
    for result in results:
        table.add_row(
            result.name,
            escape(result.statement),
            str(result.samples),
            f"{result.worst:.2e}",
            _status(result.passed),
        )
    console.print(table)
    raise typer.Exit(code=EXIT_OK if all(r.passed for r in results) else EXIT_FAILED)


@app.command()
def certificate(
    config: str = ConfigOption,
    out: Path | None = OutOption,
    samples: int = typer.Option(10_000, "--samples", min=1, help="Random states in the dV/dt audit"),
) -> None:
    """Dump the Lyapunov certificate of a config and audit it at random states."""
    experiment = _load(config, None)
    run_config = experiment.run
    try:
        cert = certificate_for(run_config)
    except CertificateError as e:
        raise _fail(EXIT_CONFIG, str(e)) from e
    if cert is None:
        raise _fail(EXIT_CONFIG, f"no certificate for variant {run_config.variant.kind}")
    audit = audit_certificate(cert, nominal_gain(run_config.variant), n=samples, seed=run_config.seed)

    out_dir = _out_dir(out, experiment)
    ExportService().write_summary(
        {"certificate": cert.to_dict(), "audit": audit.to_dict(), "variant": run_config.variant.kind},
        out_dir / f"{run_config.name}_certificate.json",
    )

    table = Table(title=f"{run_config.name}: certificate ({run_config.variant.kind})")
    table.add_column("constant")
    table.add_column("value", justify="right")
    for key in ("epsilon", "alpha", "beta", "a", "C", "lambda_min_GtG", "norm_G"):
        table.add_row(key, f"{getattr(cert, key):.6g}")
    table.add_row("k_P / k_I (base form)", f"{cert.gains.k_P:g} / {cert.gains.k_I:g}")
    table.add_row("B_Omega / B_b", f"{cert.bounds.B_Omega:.4g} / {cert.bounds.B_b:.4g}")
    table.add_row("max dV/dt + beta V", f"{audit.max_rate_excess:.3e}")
    table.add_row("audit", _status(audit.passed))
    console.print(table)
    raise typer.Exit(code=EXIT_OK if audit.passed else EXIT_FAILED)


def cli_app() -> None:
    """Entry point for the CLI application."""
    app()


if __name__ == "__main__":
    cli_app()
