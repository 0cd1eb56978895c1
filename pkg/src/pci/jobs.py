"""Job file loader.

Loads a job document (YAML, or JSON through the same parser) with safety
guards:

* Size limit (``Settings.job_max_size_kb``, default 256 KB).
* ``yaml.safe_load`` only — no arbitrary Python objects.
* Encoding validated (UTF-8).
* Schema checked by strict Pydantic models, then cross-field invariants
  (orbital names defined, electron counts, bra/ket shapes, a job-level
  ``mu_max`` that reaches every azimuthal order).

Every violation is reported as ``"<field path>: <message>"`` and nothing
is ever evaluated here.  See ``jobs/example_job.yaml`` for a commented
example.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pci.core.errors import JobInvalid, JobNotFound, JobTooLarge, KernelConsistencyError, OracleUsageError
from pci.core.models import IntegralKind, OracleMode
from pci.modules.grid import GridSpec
from pci.modules.orbitals import OrbitalParams
from pci.modules.series import SeriesControls

logger = structlog.get_logger()

_DEFAULT_MAX_SIZE_BYTES = 256 * 1024
_SEPTUPLE = ("p", "q", "gamma", "nu", "alpha", "beta", "m")
_ONE_BODY = frozenset({IntegralKind.OVERLAP, IntegralKind.KINETIC, IntegralKind.NUCLEAR_ATTRACTION})


# ── Pydantic v2 strict models ──────────────────────────────
class OrbitalSpec(BaseModel):
    """One named septuple; a bare 7-element list is accepted too."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    p: int = Field(default=0, ge=0)
    q: int = Field(default=0, ge=0)
    gamma: int = Field(default=0, ge=0)
    nu: int = Field(default=0, ge=0)
    alpha: float = Field(gt=0.0, allow_inf_nan=False)
    beta: float = Field(default=0.0, allow_inf_nan=False)
    m: int = 0

    @model_validator(mode="before")
    @classmethod
    def _from_list(cls, raw: Any) -> Any:
        if isinstance(raw, list | tuple):
            if len(raw) != len(_SEPTUPLE):
                raise ValueError(f"a septuple needs 7 entries {_SEPTUPLE}, got {len(raw)}")
            return dict(zip(_SEPTUPLE, raw, strict=True))
        return raw

    def params(self) -> OrbitalParams:
        return OrbitalParams(self.p, self.q, self.gamma, self.nu, self.alpha, self.beta, self.m)


class ControlsSpec(BaseModel):
    """Per-job series overrides; unset fields fall back to settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mu_max: int | None = Field(default=None, ge=0)
    rel_tol: float | None = Field(default=None, gt=0.0, allow_inf_nan=False)
    min_shells: int | None = Field(default=None, ge=1)
    grid: str | None = None

    @field_validator("grid")
    @classmethod
    def _grid_parses(cls, v: str | None) -> str | None:
        if v is not None:
            try:
                GridSpec.parse(v)
            except KernelConsistencyError as exc:
                raise ValueError(str(exc)) from exc
        return v

    def resolve(self, defaults: SeriesControls) -> SeriesControls:
        return SeriesControls(
            mu_max=defaults.mu_max if self.mu_max is None else self.mu_max,
            rel_tol=defaults.rel_tol if self.rel_tol is None else self.rel_tol,
            min_shells=defaults.min_shells if self.min_shells is None else self.min_shells,
            grid=defaults.grid if self.grid is None else GridSpec.parse(self.grid),
        )


class OracleSpec(BaseModel):
    """Oracle comparison: ``off``, ``auto`` or seeded Monte Carlo."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: OracleMode = OracleMode.OFF
    samples: int | None = Field(default=None, ge=1)
    seed: int | None = None

    @classmethod
    def parse(cls, text: str) -> OracleSpec:
        """Parse the ``--oracle`` flag: ``off``, ``auto`` or ``mc:SAMPLES:SEED``."""
        head, *rest = text.strip().split(":")
        try:
            mode = OracleMode(head)
        except ValueError as exc:
            raise OracleUsageError(f"oracle must be off, auto or mc:SAMPLES:SEED, got {text!r}") from exc
        if mode is not OracleMode.MC:
            if rest:
                raise OracleUsageError(f"oracle mode {mode.value!r} takes no parameters")
            return cls(mode=mode)
        try:
            samples, seed = (int(part) for part in rest)
        except ValueError as exc:
            raise OracleUsageError(f"oracle must look like mc:SAMPLES:SEED, got {text!r}") from exc
        if samples < 1:
            raise OracleUsageError(f"oracle samples must be >= 1, got {samples}")
        return cls(mode=mode, samples=samples, seed=seed)


class RequestSpec(BaseModel):
    """One matrix element to evaluate.

    Correlated kinds and ``overlap``/``nuclear_attraction`` take
    ``orbitals`` (names of charge distributions, electron 1 first);
    ``kinetic`` takes ``bra`` and ``ket`` of equal length.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: IntegralKind
    label: str | None = None
    orbitals: tuple[str, ...] = ()
    bra: tuple[str, ...] = ()
    ket: tuple[str, ...] = ()
    l: int = Field(default=0, ge=0, le=2)  # noqa: E741
    l_prime: int = Field(default=0, ge=0, le=2)
    bra_pair: Literal[2, 3] = 3
    closed_form: bool = False
    Z_a: float = Field(default=1.0, allow_inf_nan=False)
    Z_b: float = Field(default=1.0, allow_inf_nan=False)


class JobFile(BaseModel):
    """A validated job: geometry, named orbitals and the requests to run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    R: float = Field(gt=0.0, allow_inf_nan=False)
    orbitals: dict[str, OrbitalSpec] = Field(min_length=1)
    requests: tuple[RequestSpec, ...] = Field(min_length=1)
    controls: ControlsSpec = ControlsSpec()
    oracle: OracleSpec = OracleSpec()

    @field_validator("orbitals")
    @classmethod
    def _names_not_blank(cls, v: dict[str, OrbitalSpec]) -> dict[str, OrbitalSpec]:
        for name in v:
            if not str(name).strip():
                raise ValueError("orbital names must not be blank")
        return v

    def resolve(self, names: tuple[str, ...]) -> tuple[OrbitalParams, ...]:
        return tuple(self.orbitals[name].params() for name in names)


# ── Cross-field invariants ─────────────────────────────────
def _request_errors(i: int, req: RequestSpec, defined: set[str]) -> list[str]:
    where = f"requests.{i}"
    errors: list[str] = []
    fields = req.model_fields_set

    if req.kind is IntegralKind.KINETIC:
        if req.orbitals:
            errors.append(f"{where}.orbitals: kinetic takes bra and ket, not orbitals")
        if not req.bra or not req.ket:
            errors.append(f"{where}: kinetic needs non-empty bra and ket")
        elif len(req.bra) != len(req.ket):
            errors.append(f"{where}.ket: bra has {len(req.bra)} orbitals, ket has {len(req.ket)}")
    else:
        if req.bra or req.ket:
            errors.append(f"{where}: bra/ket apply to kinetic requests only")
        if not req.orbitals:
            errors.append(f"{where}.orbitals: at least one orbital is required")

    if req.kind in _ONE_BODY:
        count = len(req.bra) if req.kind is IntegralKind.KINETIC else len(req.orbitals)
        pair = req.bra_pair if req.kind is IntegralKind.KINETIC else 3
        needed = max(2 if req.l else 1, pair if req.l_prime else 1)
        if count and count < needed:
            errors.append(f"{where}: (l, l_prime) = ({req.l}, {req.l_prime}) needs {needed} electrons, got {count}")
        if req.closed_form and not (req.kind is IntegralKind.KINETIC and req.bra_pair == 2 and req.l == req.l_prime == 1):
            errors.append(f"{where}.closed_form: only kinetic with bra_pair=2 and l=l_prime=1 has a closed form")
    else:
        for name in ("l", "l_prime", "bra_pair", "closed_form", "Z_a", "Z_b"):
            if name in fields:
                errors.append(f"{where}.{name}: applies to overlap, kinetic and nuclear_attraction only")
        count = req.kind.electron_count
        if req.orbitals and count is not None and len(req.orbitals) != count:
            errors.append(f"{where}.orbitals: {req.kind.value} needs {count} orbitals, got {len(req.orbitals)}")

    for field, names in (("orbitals", req.orbitals), ("bra", req.bra), ("ket", req.ket)):
        for j, name in enumerate(names):
            if name not in defined:
                errors.append(f"{where}.{field}.{j}: unknown orbital {name!r}")
    return errors


def _controls_errors(job: JobFile) -> list[str]:
    """A job-level ``mu_max`` must reach the azimuthal order of every series."""
    mu_max = job.controls.mu_max
    if mu_max is None:
        return []
    used = {name for req in job.requests for name in req.orbitals if name in job.orbitals}
    orders = {name: abs(job.orbitals[name].m) for name in used}
    if not orders:
        return []
    name, order = max(sorted(orders.items()), key=lambda item: item[1])
    if order <= mu_max:
        return []
    return [f"controls.mu_max: {mu_max} is below |m| = {order} of orbital {name!r}"]


def job_errors(job: JobFile) -> list[str]:
    """Invariant violations the per-field schema cannot see."""
    defined = set(job.orbitals)
    errors: list[str] = []
    for i, req in enumerate(job.requests):
        errors.extend(_request_errors(i, req, defined))
    errors.extend(_controls_errors(job))
    return errors


def _format_validation(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        path = ".".join(str(part) for part in err["loc"]) or "<root>"
        out.append(f"{path}: {err['msg']}")
    return out


# ── Loader ──────────────────────────────────────────────────
def load_job(
    path: Path,
    *,
    max_size_bytes: int = _DEFAULT_MAX_SIZE_BYTES,
) -> JobFile:
    """Load and validate a job file.

    Parameters
    ----------
    path:
        Path to the YAML or JSON job.
    max_size_bytes:
        Reject files larger than this.

    Raises
    ------
    JobNotFound
        File does not exist.
    JobTooLarge
        File exceeds *max_size_bytes*.
    JobInvalid
        Parse error, schema violation or broken invariant; ``errors``
        carries one entry per violation.
    """
    if not path.is_file():
        raise JobNotFound(f"job not found: {path}")

    size = path.stat().st_size
    if size > max_size_bytes:
        raise JobTooLarge(f"job {path.name} is {size:,} bytes (limit {max_size_bytes:,})")

    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise JobInvalid("job is not valid UTF-8", [f"<file>: {exc}"]) from exc

    try:
        raw: Any = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise JobInvalid("job parse error", [f"<file>: {exc}"]) from exc

    if not isinstance(raw, dict):
        raise JobInvalid("job schema invalid", ["<root>: expected a mapping with R, orbitals and requests"])

    try:
        job = JobFile.model_validate(raw)
    except ValidationError as exc:
        raise JobInvalid("job schema invalid", _format_validation(exc)) from exc

    errors = job_errors(job)
    if errors:
        raise JobInvalid("job invariants violated", errors)

    logger.info("job_loaded", path=str(path), R=job.R, orbitals=len(job.orbitals), requests=len(job.requests))
    return job


def validate_job(
    path: Path,
    *,
    max_size_bytes: int = _DEFAULT_MAX_SIZE_BYTES,
) -> tuple[JobFile | None, list[str]]:
    """``(job, [])`` for a valid file, otherwise ``(None, errors)``.

    Missing and oversized files come back as a single error entry.
    """
    try:
        return load_job(path, max_size_bytes=max_size_bytes), []
    except (JobNotFound, JobTooLarge) as exc:
        return None, [f"<file>: {exc}"]
    except JobInvalid as exc:
        return None, exc.errors or [str(exc)]

