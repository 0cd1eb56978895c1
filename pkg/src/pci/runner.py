"""Batch runner: evaluate every request of a job and write a JSON report.

How it works
------------
1. :func:`pci.jobs.load_job` validates the file (nothing runs on error).
2. Series controls resolve as flag > job ``controls`` > settings default.
3. Requests run concurrently up to ``threads``; records are assembled in
   request order, so the report never depends on scheduling.
4. When an oracle is requested each record carries an independent
   estimate and a ``pass``/``fail``/``skipped`` verdict.
5. The report payload (everything except wall times and the timestamp)
   is serialised canonically and its SHA-256 stored as
   ``payload_digest``; two runs with the same job and seed agree on it.

Exit status is 0 iff every request converged without error and no oracle
comparison failed, else 1.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import structlog

from pci.core.errors import PCIError
from pci.core.models import IntegralKind, OracleMode, Verdict
from pci.core.settings import Settings
from pci.jobs import JobFile, OracleSpec, RequestSpec, load_job
from pci.modules.grid import GridSpec
from pci.modules.integrals import integrand_for, matrix_element
from pci.modules.one_body import kinetic_energy, nuclear_attraction, overlap, overlap_integrand
from pci.modules.oracle import (
    MIN_MANY_ELECTRON_SAMPLES,
    OracleEstimate,
    Operator,
    monte_carlo,
    oracle_kinetic,
    oracle_many_electron,
    oracle_one_electron,
    oracle_two_electron,
)
from pci.modules.orbitals import OrbitalParams
from pci.modules.series import SeriesControls, SeriesResult

UTC = timezone.utc

logger = structlog.get_logger()

REPORT_SCHEMA = "pci.report/1"
EXIT_OK = 0
EXIT_NUMERIC = 1

# Tensor rules reach the tolerance only on smooth integrands.
_DETERMINISTIC_KINDS = frozenset({IntegralKind.R12_SQ})
# 1/r12³ is not absolutely integrable; no brute-force reference exists.
_NO_ORACLE_KINDS = frozenset({IntegralKind.INV_R12_CUB})


@dataclass(frozen=True)
class RunFlags:
    """Command-line overrides; ``None`` means "use the job or settings"."""

    out: Path | None = None
    rel_tol: float | None = None
    mu_max: int | None = None
    grid: GridSpec | None = None
    oracle: OracleSpec | None = None
    threads: int | None = None


@dataclass(frozen=True)
class OracleRecord:
    method: str
    value: float | None
    stderr: float
    evaluations: int
    seed: int | None
    verdict: Verdict

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "value": None if self.value is None else _number(self.value),
            "stderr": _number(self.stderr),
            "evaluations": self.evaluations,
            "seed": self.seed,
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class RequestRecord:
    """One report entry; ``error`` is set when the request raised."""

    index: int
    request: RequestSpec
    result: SeriesResult | None
    wall_time: float
    oracle: OracleRecord | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        if self.error is not None or self.result is None or not self.result.converged:
            return False
        return self.oracle is None or self.oracle.verdict is not Verdict.FAIL

    def payload(self) -> dict[str, Any]:
        req = self.request
        out: dict[str, Any] = {"index": self.index, "kind": req.kind.value}
        if req.label is not None:
            out["label"] = req.label
        if req.kind is IntegralKind.KINETIC:
            out["orbitals"] = {"bra": list(req.bra), "ket": list(req.ket)}
            out.update(l=req.l, l_prime=req.l_prime, bra_pair=req.bra_pair, closed_form=req.closed_form)
        else:
            out["orbitals"] = list(req.orbitals)
            if req.kind in (IntegralKind.OVERLAP, IntegralKind.NUCLEAR_ATTRACTION):
                out.update(l=req.l, l_prime=req.l_prime)
            if req.kind is IntegralKind.NUCLEAR_ATTRACTION:
                out.update(Z_a=req.Z_a, Z_b=req.Z_b)
        res = self.result
        out["value"] = None if res is None else _number(res.value)
        out["trunc_error"] = None if res is None else _number(res.trunc_error)
        out["converged"] = res is not None and res.converged
        out["shells"] = (
            [] if res is None else [{"mu": s.mu, "value": _number(s.value), "terms": s.terms} for s in res.shells]
        )
        out["oracle"] = None if self.oracle is None else self.oracle.to_dict()
        out["error"] = self.error
        return out


@dataclass(frozen=True)
class RunOutcome:
    report_path: Path
    records: tuple[RequestRecord, ...]
    exit_code: int
    report: dict[str, Any] = field(repr=False)


# ── Serialisation ───────────────────────────────────────────
def _number(value: float) -> float | str:
    """Python floats already print as the shortest round-trip decimal."""
    value = float(value)
    if math.isfinite(value):
        return value
    return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")


def canonical_payload(report: dict[str, Any]) -> str:
    """The report without timing fields, as sorted compact JSON."""
    stripped = {k: v for k, v in report.items() if k not in ("generated_at", "wall_time", "payload_digest")}
    stripped["records"] = [{k: v for k, v in r.items() if k != "wall_time"} for r in report["records"]]
    return json.dumps(stripped, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ── Control resolution ──────────────────────────────────────
def resolve_controls(job: JobFile, flags: RunFlags, settings: Settings) -> SeriesControls:
    base = job.controls.resolve(settings.series_controls())
    return SeriesControls(
        mu_max=base.mu_max if flags.mu_max is None else flags.mu_max,
        rel_tol=base.rel_tol if flags.rel_tol is None else flags.rel_tol,
        min_shells=base.min_shells,
        grid=base.grid if flags.grid is None else flags.grid,
    )


def resolve_oracle(job: JobFile, flags: RunFlags, settings: Settings) -> OracleSpec:
    spec = flags.oracle if flags.oracle is not None else job.oracle
    if spec.mode is OracleMode.OFF:
        return spec
    return OracleSpec(
        mode=spec.mode,
        samples=settings.mc_samples if spec.samples is None else spec.samples,
        seed=settings.mc_seed if spec.seed is None else spec.seed,
    )


# ── Evaluation ──────────────────────────────────────────────
def evaluate_request(
    req: RequestSpec,
    job: JobFile,
    ctrl: SeriesControls,
) -> SeriesResult:
    """The series value of one request."""
    R = job.R  # noqa: N806
    if req.kind is IntegralKind.KINETIC:
        return kinetic_energy(
            job.resolve(req.bra),
            job.resolve(req.ket),
            req.l,
            req.l_prime,
            R,
            ctrl,
            bra_pair=req.bra_pair,
            closed_form=req.closed_form,
        )
    orbitals = job.resolve(req.orbitals)
    if req.kind is IntegralKind.OVERLAP:
        return overlap(orbitals, req.l, req.l_prime, R, ctrl)
    if req.kind is IntegralKind.NUCLEAR_ATTRACTION:
        return nuclear_attraction(orbitals, req.Z_a, req.Z_b, req.l, req.l_prime, R, ctrl)
    return matrix_element(req.kind, orbitals, R, ctrl)


def _request_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _one_electron_product(
    orbitals: tuple[OrbitalParams, ...],
    operator: Operator,
    R: float,  # noqa: N803
    order: int,
    *,
    Z_a: float = 1.0,  # noqa: N803
    Z_b: float = 1.0,  # noqa: N803
) -> OracleEstimate:
    """Electron 1 under *operator*, the others as plain totals."""
    value = oracle_one_electron(orbitals[0], operator, R, order, Z_a=Z_a, Z_b=Z_b).value
    for o in orbitals[1:]:
        value *= oracle_one_electron(o, "overlap", R, order).value
    return OracleEstimate(value=value, evaluations=len(orbitals) * order * order)


def estimate_request(
    req: RequestSpec,
    job: JobFile,
    spec: OracleSpec,
    settings: Settings,
    index: int,
    *,
    threads: int = 1,
) -> tuple[str, OracleEstimate] | None:
    """An independent estimate for *req*, or ``None`` when none applies.

    ``auto`` uses deterministic rules for smooth one- and two-electron
    operands and Monte Carlo for the rest; ``mc`` uses Monte Carlo wherever
    a sampler exists.
    """
    assert spec.samples is not None and spec.seed is not None  # resolved by resolve_oracle
    R = job.R  # noqa: N806
    seed = _request_seed(spec.seed, index)
    samples = spec.samples
    order = settings.oracle_order
    auto = spec.mode is OracleMode.AUTO
    kind = req.kind

    if kind in _NO_ORACLE_KINDS:
        return None
    if kind is IntegralKind.KINETIC:
        est = oracle_kinetic(
            job.resolve(req.bra), job.resolve(req.ket), req.l, req.l_prime, req.bra_pair, R, samples, seed,
            threads=threads,
        )
        return "mc_kinetic", est

    orbitals = job.resolve(req.orbitals)
    if kind is IntegralKind.NUCLEAR_ATTRACTION:
        if req.l or req.l_prime:
            return None
        return "tensor", _one_electron_product(orbitals, "attraction", R, order, Z_a=req.Z_a, Z_b=req.Z_b)
    if kind is IntegralKind.OVERLAP:
        if auto and req.l == req.l_prime == 0:
            return "tensor", _one_electron_product(orbitals, "overlap", R, order)
        return "mc", monte_carlo(overlap_integrand(orbitals, req.l, req.l_prime), R, samples, seed, threads=threads)
    if kind.electron_count == 2:
        if auto and kind in _DETERMINISTIC_KINDS:
            return "tensor", oracle_two_electron(kind, orbitals[0], orbitals[1], R, order)
        return "mc", monte_carlo(integrand_for(kind, orbitals), R, samples, seed, threads=threads)
    if samples < MIN_MANY_ELECTRON_SAMPLES:
        logger.debug("oracle_samples_raised", kind=kind.value, requested=samples, used=MIN_MANY_ELECTRON_SAMPLES)
        samples = MIN_MANY_ELECTRON_SAMPLES
    return "mc", oracle_many_electron(kind, orbitals, R, samples, seed, threads=threads)


def _run_one(
    index: int,
    req: RequestSpec,
    job: JobFile,
    ctrl: SeriesControls,
    spec: OracleSpec,
    settings: Settings,
    threads: int,
) -> RequestRecord:
    started = time.perf_counter()
    try:
        result = evaluate_request(req, job, ctrl)
        oracle = None
        if spec.mode is not OracleMode.OFF:
            found = estimate_request(req, job, spec, settings, index, threads=threads)
            if found is None:
                oracle = OracleRecord("none", None, 0.0, 0, None, Verdict.SKIPPED)
            else:
                method, est = found
                verdict = est.verdict(result.value, rel_tol=settings.oracle_rel_tol)
                oracle = OracleRecord(method, est.value, est.standard_error, est.evaluations, est.seed, verdict)
    except PCIError as exc:
        wall = time.perf_counter() - started
        logger.warning("request_failed", index=index, kind=req.kind.value, error=str(exc))
        return RequestRecord(index, req, None, wall, error=f"{type(exc).__name__}: {exc}")

    wall = time.perf_counter() - started
    logger.info(
        "request_finished",
        index=index,
        kind=req.kind.value,
        value=result.value,
        converged=result.converged,
        shells=len(result.shells),
        verdict=None if oracle is None else oracle.verdict.value,
        wall_time=wall,
    )
    return RequestRecord(index, req, result, wall, oracle)


# ── Entry point ─────────────────────────────────────────────
def run_job(path: Path, flags: RunFlags, settings: Settings) -> RunOutcome:
    """Validate, evaluate and report *path*.

    Raises
    ------
    JobNotFound, JobInvalid, JobTooLarge
        From :func:`pci.jobs.load_job`; nothing is evaluated.
    """
    job = load_job(path, max_size_bytes=settings.job_max_size_bytes)
    ctrl = resolve_controls(job, flags, settings)
    spec = resolve_oracle(job, flags, settings)
    threads = max(1, flags.threads or settings.threads)
    inner = threads if len(job.requests) == 1 else 1

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_run_one, i, req, job, ctrl, spec, settings, inner) for i, req in enumerate(job.requests)
        ]
        records = tuple(f.result() for f in futures)
    wall = time.perf_counter() - started

    exit_code = EXIT_OK if all(r.ok for r in records) else EXIT_NUMERIC
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "job": path.name,
        "R": job.R,
        "controls": {
            "mu_max": ctrl.mu_max,
            "rel_tol": ctrl.rel_tol,
            "min_shells": ctrl.min_shells,
            "grid": f"{ctrl.grid.outer_panels}:{ctrl.grid.nodes_per_panel}",
        },
        "oracle": {"mode": spec.mode.value, "samples": spec.samples, "seed": spec.seed},
        "exit_status": exit_code,
        "records": [dict(r.payload(), wall_time=r.wall_time) for r in records],
        "generated_at": datetime.now(UTC).isoformat(timespec="seconds"),
        "wall_time": wall,
    }
    report["payload_digest"] = hashlib.sha256(canonical_payload(report).encode("utf-8")).hexdigest()

    out = flags.out
    if out is None:
        settings.ensure_dirs()
        assert settings.reports_dir is not None
        out = settings.reports_dir / f"{path.stem}.report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    logger.info("report_written", path=str(out), requests=len(records), exit_status=exit_code, wall_time=wall)
    return RunOutcome(report_path=out, records=records, exit_code=exit_code, report=report)
