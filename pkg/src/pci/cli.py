"""PCI CLI — presentation layer.

Thin adapter: all numerical work lives in ``pci.modules`` and the batch
logic in :mod:`pci.runner`.  The CLI maps flags to a
:class:`~pci.runner.RunFlags`, prints a summary and turns outcomes into
exit codes (0 ok, 1 numeric failure, 2 usage or job error).
"""

from __future__ import annotations

from pathlib import Path

import structlog
import typer
from rich import print
from rich.table import Table

from pci.core.errors import (
    JobInvalid,
    JobNotFound,
    JobTooLarge,
    KernelConsistencyError,
    OracleUsageError,
    PCIError,
    RepoRootNotFound,
)
from pci.core.logging import configure_logging
from pci.core.models import IntegralKind
from pci.core.paths import resolve_under_root
from pci.core.settings import Settings
from pci.jobs import OracleSpec, validate_job
from pci.modules.grid import GridSpec
from pci.runner import RunFlags, RunOutcome, run_job

logger = structlog.get_logger()

app = typer.Typer(help="PCI — correlated two-center integrals over prolate-spheroidal orbitals.")

EXIT_USAGE = 2


# ── Callback (runs before every command) ────────────────────
@app.callback(invoke_without_command=True)
def _main_callback(  # pyright: ignore[reportUnusedFunction]
    ctx: typer.Context,
    log_level: str = typer.Option("INFO", "--log-level", envvar="PCI_LOG_LEVEL", help="Log level."),
    log_json: bool = typer.Option(True, "--log-json/--log-text", envvar="PCI_LOG_JSON", help="JSON or human logs."),
) -> None:
    """Configure logging + settings, then store in context for sub-commands."""
    configure_logging(level=log_level, json_output=log_json)
    try:
        settings = Settings(log_level=log_level, log_json=log_json)
    except RepoRootNotFound:
        print("[red]ERROR:[/red] could not find repo root (pyproject.toml not found in parents).")
        raise typer.Exit(code=EXIT_USAGE)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings

    if ctx.invoked_subcommand is None:
        print(ctx.get_help())


def _settings(ctx: typer.Context) -> Settings:
    return ctx.obj["settings"]


def _under_root(s: Settings, path: Path) -> Path:
    assert s.repo_root is not None  # guaranteed by model_validator
    return resolve_under_root(path, s.repo_root)


def _print_errors(errors: list[str]) -> None:
    for err in errors:
        print(f"  [red]-[/red] {err}")


# ── Commands ────────────────────────────────────────────────
@app.command()
def status(ctx: typer.Context) -> None:
    """Show resolved paths and numerical defaults."""
    s = _settings(ctx)

    print("[bold]PCI[/bold]  v0.1.0")
    print(f"  Repo root   : {s.repo_root}")
    for label, d in (("Jobs", s.jobs_dir), ("Reports", s.reports_dir)):
        if d is None:
            print(f"  {label:<12}: [red]NOT CONFIGURED[/red]")
            continue
        print(f"  {label:<12}: {d}  {'[green]OK[/green]' if d.exists() else '[yellow]MISSING[/yellow]'}")

    ctrl = s.series_controls()
    print(f"\n  mu_max      : {ctrl.mu_max}")
    print(f"  rel_tol     : {ctrl.rel_tol:g}")
    print(f"  grid        : {ctrl.grid.outer_panels}:{ctrl.grid.nodes_per_panel}")
    print(f"  threads     : {s.threads}")
    print(f"  MC samples  : {s.mc_samples:,} (seed {s.mc_seed})")

    logger.info("status_checked", repo_root=str(s.repo_root))


@app.command()
def kinds() -> None:
    """List every integral kind with its electron count and R power."""
    table = Table(title="Integral kinds")
    table.add_column("Kind", style="bold")
    table.add_column("Electrons", justify="right")
    table.add_column("R power", justify="right")
    for kind in IntegralKind:
        electrons = kind.electron_count
        power = kind.r_power
        table.add_row(
            kind.value,
            "1-3" if electrons is None else str(electrons),
            "depends on l, l′" if power is None else str(power),
        )
    print(table)


@app.command()
def validate(
    ctx: typer.Context,
    job: Path = typer.Option(..., "--job", help="Job file (relative to repo root unless absolute)."),
) -> None:
    """Check a job file's schema and invariants without evaluating anything."""
    s = _settings(ctx)
    job_path = _under_root(s, job)
    parsed, errors = validate_job(job_path, max_size_bytes=s.job_max_size_bytes)
    if parsed is None:
        print(f"[red]ERROR:[/red] {job_path} has {len(errors)} problem(s):")
        _print_errors(errors)
        raise typer.Exit(code=EXIT_USAGE)
    print(f"[green]OK[/green] job valid: {job_path} ({len(parsed.requests)} requests, {len(parsed.orbitals)} orbitals)")


def _summary(outcome: RunOutcome) -> Table:
    table = Table(title=f"Report {outcome.report_path.name}")
    table.add_column("#", justify="right")
    table.add_column("Kind", style="bold")
    table.add_column("Value", justify="right")
    table.add_column("Trunc. error", justify="right")
    table.add_column("Converged")
    table.add_column("Oracle")
    for r in outcome.records:
        if r.result is None:
            table.add_row(str(r.index), r.request.kind.value, "-", "-", "[red]error[/red]", r.error or "")
            continue
        verdict = "-" if r.oracle is None else r.oracle.verdict.value
        colour = {"pass": "green", "fail": "red"}.get(verdict, "yellow")
        table.add_row(
            str(r.index),
            r.request.kind.value,
            repr(r.result.value),
            f"{r.result.trunc_error:.2e}",
            "[green]yes[/green]" if r.result.converged else "[red]no[/red]",
            f"[{colour}]{verdict}[/{colour}]",
        )
    return table


@app.command()
def run(
    ctx: typer.Context,
    job: Path = typer.Option(..., "--job", help="Job file (relative to repo root unless absolute)."),
    out: Path = typer.Option(None, "--out", help="Report path (default: reports/<job>.report.json)."),
    tol: float = typer.Option(None, "--tol", help="Relative series tolerance.", min=0.0),
    mu_max: int = typer.Option(None, "--mu-max", help="Largest Legendre degree.", min=0),
    grid: str = typer.Option(None, "--grid", help="Radial grid as PANELS:NODES."),
    oracle: str = typer.Option(None, "--oracle", help="off | auto | mc:SAMPLES:SEED."),
    threads: int = typer.Option(None, "--threads", help="Requests evaluated concurrently.", min=1),
) -> None:
    """Evaluate every request of a job and write the JSON report."""
    s = _settings(ctx)
    try:
        flags = RunFlags(
            out=None if out is None else _under_root(s, out),
            rel_tol=tol,
            mu_max=mu_max,
            grid=None if grid is None else GridSpec.parse(grid),
            oracle=None if oracle is None else OracleSpec.parse(oracle),
            threads=threads,
        )
    except (KernelConsistencyError, OracleUsageError) as exc:
        print(f"[red]ERROR:[/red] {exc}")
        raise typer.Exit(code=EXIT_USAGE)
    if tol is not None and tol <= 0.0:
        print("[red]ERROR:[/red] --tol must be > 0")
        raise typer.Exit(code=EXIT_USAGE)

    job_path = _under_root(s, job)
    try:
        outcome = run_job(job_path, flags, s)
    except (JobNotFound, JobTooLarge) as exc:
        print(f"[red]ERROR:[/red] {exc}")
        raise typer.Exit(code=EXIT_USAGE)
    except JobInvalid as exc:
        print(f"[red]ERROR:[/red] {job_path} is not a valid job:")
        _print_errors(exc.errors or [str(exc)])
        raise typer.Exit(code=EXIT_USAGE)
    except PCIError as exc:
        print(f"[red]ERROR:[/red] {exc}")
        raise typer.Exit(code=1)

    print(_summary(outcome))
    if outcome.exit_code:
        print(f"[yellow]PARTIAL[/yellow] report written to {outcome.report_path}")
    else:
        print(f"[green]OK[/green] report written to {outcome.report_path}")
    raise typer.Exit(code=outcome.exit_code)


# ── Entrypoint ──────────────────────────────────────────────
def main() -> None:  # noqa: D103
    app()
