"""PCI domain exceptions.

Every module raises typed exceptions so callers can handle failures
explicitly instead of catching bare ValueError/RuntimeError.  A series
that stops at ``mu_max`` is *not* an error: it comes back as a
``SeriesResult`` with ``converged=False``.
"""

from __future__ import annotations


# ── Base ────────────────────────────────────────────────────
class PCIError(Exception):
    """Root exception for all PCI errors."""


# ── Repo / filesystem ──────────────────────────────────────
class RepoRootNotFound(PCIError):
    """Could not locate the repository root (pyproject.toml marker)."""

    def __init__(self, start_path: str | None = None) -> None:
        where = f" (searched from {start_path})" if start_path else ""
        super().__init__(f"Repository root not found{where}: no pyproject.toml in parent chain")
        self.start_path = start_path


# ── Special functions / coordinates ────────────────────────
class DomainRangeError(PCIError):
    """An argument fell outside the real domain a function is defined on."""

    def __init__(self, function: str, argument: str, value: float) -> None:
        super().__init__(f"{function}: {argument}={value!r} is outside the domain")
        self.function = function
        self.argument = argument
        self.value = value


# ── Orbitals ───────────────────────────────────────────────
class InvalidOrbital(PCIError):
    """A basis septuple violates its invariants (α ≤ 0, negative powers)."""


class ShiftError(InvalidOrbital):
    """An index shift produced a negative power with nowhere to put it."""

    def __init__(self, field: str, value: int) -> None:
        super().__init__(f"shift leaves {field}={value} (must be >= 0)")
        self.field = field
        self.value = value


# ── Kernels ─────────────────────────────────────────────────
class ParityUnsupported(PCIError):
    """(γ+σ)/2 or (ν+σ)/2 is half-integral; the kernel sums would be infinite."""

    def __init__(self, gamma: int, nu: int, order: int) -> None:
        super().__init__(
            f"unsupported parity: gamma={gamma}, nu={nu} with Legendre order {order} "
            "give half-integral powers"
        )
        self.gamma = gamma
        self.nu = nu
        self.order = order


class KernelConsistencyError(PCIError):
    """Tables from different grids were mixed, or a required table is missing."""


# ── Matrix elements ────────────────────────────────────────
class UnsupportedIntegral(PCIError):
    """Unknown kind, wrong orbital count, or an unsupported (l, l′) combination."""


# ── Oracles ─────────────────────────────────────────────────
class OracleUsageError(PCIError):
    """An oracle was asked for an integral it does not handle."""


class OracleDensityMismatch(PCIError):
    """The proposal density vanishes where the integrand does not."""


# ── Job files ───────────────────────────────────────────────
class JobNotFound(PCIError):
    """The job file does not exist at the expected path."""


class JobInvalid(PCIError):
    """The job failed parsing or schema validation.

    ``errors`` lists one ``"<field path>: <message>"`` entry per violation.
    """

    def __init__(self, message: str, errors: list[str] | None = None) -> None:
        detail = "; ".join(errors) if errors else ""
        super().__init__(f"{message}: {detail}" if detail else message)
        self.errors = list(errors or [])


class JobTooLarge(JobInvalid):
    """The job file exceeds the allowed size limit."""
