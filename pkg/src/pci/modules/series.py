"""Shell-by-shell summation of the infinite Legendre-degree series.

Every matrix element is a sum over Legendre degrees that the formulas
leave infinite.  Terms are grouped into *shells* (all terms whose
largest degree is n) and summed in ascending shell order until two
consecutive shells are negligible against the running total.

Usage
-----
::

    result = sum_shells(lambda n: (shell_value(n), term_count(n)), ctrl, label="inv_r12")
    result.value, result.trunc_error, result.converged
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import structlog

from pci.modules.grid import GridSpec

logger = structlog.get_logger()


@dataclass(frozen=True)
class SeriesControls:
    """Truncation and discretisation knobs shared by every series."""

    mu_max: int = 30
    rel_tol: float = 1e-10
    min_shells: int = 4
    grid: GridSpec = field(default_factory=GridSpec)


@dataclass(frozen=True)
class ShellTerm:
    """Contribution of one shell (largest Legendre degree ``mu``)."""

    mu: int
    value: float
    terms: int


@dataclass(frozen=True)
class SeriesResult:
    """Value of a truncated series with its convergence ledger.

    ``trunc_error`` is the magnitude of the last two shells.  A series that
    hit ``mu_max`` is returned with ``converged=False``; that is never an
    exception.
    """

    value: float
    trunc_error: float
    converged: bool
    shells: tuple[ShellTerm, ...] = ()

    @classmethod
    def zero(cls) -> SeriesResult:
        """Exact zero from a selection rule: converged, no shells."""
        return cls(value=0.0, trunc_error=0.0, converged=True)

    @classmethod
    def exact(cls, value: float) -> SeriesResult:
        """A closed-form value with no truncation."""
        return cls(value=float(value), trunc_error=0.0, converged=True, shells=(ShellTerm(0, float(value), 1),))

    def scaled(self, factor: float) -> SeriesResult:
        return SeriesResult(
            value=self.value * factor,
            trunc_error=self.trunc_error * abs(factor),
            converged=self.converged,
            shells=tuple(ShellTerm(s.mu, s.value * factor, s.terms) for s in self.shells),
        )


def _merge_shells(groups: Iterable[tuple[ShellTerm, ...]]) -> tuple[ShellTerm, ...]:
    by_mu: dict[int, list[ShellTerm]] = {}
    for shells in groups:
        for s in shells:
            by_mu.setdefault(s.mu, []).append(s)
    return tuple(
        ShellTerm(mu, math.fsum(s.value for s in items), sum(s.terms for s in items))
        for mu, items in sorted(by_mu.items())
    )


def combine(results: Iterable[tuple[float, SeriesResult]]) -> SeriesResult:
    """Σ cᵢ·resultᵢ with errors added in magnitude and shells merged by degree."""
    pairs = list(results)
    if not pairs:
        return SeriesResult.zero()
    scaled = [r.scaled(c) for c, r in pairs]
    return SeriesResult(
        value=math.fsum(r.value for r in scaled),
        trunc_error=math.fsum(r.trunc_error for r in scaled),
        converged=all(r.converged for r in scaled),
        shells=_merge_shells(r.shells for r in scaled),
    )


def product(left: SeriesResult, right: SeriesResult) -> SeriesResult:
    """Product of two independent series (first-order error propagation)."""
    value = left.value * right.value
    err = abs(left.value) * right.trunc_error + abs(right.value) * left.trunc_error
    shells = _merge_shells([left.scaled(right.value).shells, right.scaled(left.value).shells])
    return SeriesResult(value=value, trunc_error=err, converged=left.converged and right.converged, shells=shells)


def sum_shells(
    shell: Callable[[int], tuple[float, int]],
    ctrl: SeriesControls,
    *,
    label: str,
    first_shell: int = 0,
) -> SeriesResult:
    """Sum ``shell(n)`` for n = first_shell..mu_max.

    *shell* returns the shell's value and the number of terms it summed.
    Shells with no terms (e.g. degrees below an azimuthal order) are
    recorded but do not count towards ``min_shells`` or the stopping rule.

    A non-finite shell ends the sum at once.  The result then carries a
    NaN value and an infinite ``trunc_error`` and is never converged.
    """
    shells: list[ShellTerm] = []
    quiet = 0
    live = 0
    converged = False
    acc = 0.0
    for n in range(first_shell, ctrl.mu_max + 1):
        value, count = shell(n)
        value = float(value)
        shells.append(ShellTerm(n, value, count))
        if count == 0:
            continue
        if not math.isfinite(value):
            return _non_finite(shells, label=label, mu=n)
        live += 1
        try:
            acc = math.fsum(s.value for s in shells)
        except OverflowError:
            return _non_finite(shells, label=label, mu=n)
        quiet = quiet + 1 if abs(value) <= ctrl.rel_tol * abs(acc) else 0
        if live >= ctrl.min_shells and quiet >= 2:
            converged = True
            break

    acc = math.fsum(s.value for s in shells)
    tail = [s.value for s in shells if s.terms][-2:]
    trunc_error = math.fsum(abs(v) for v in tail)
    if converged:
        logger.debug("series_converged", label=label, shells=len(shells), value=acc, trunc_error=trunc_error)
    else:
        logger.warning("series_unconverged", label=label, mu_max=ctrl.mu_max, value=acc, trunc_error=trunc_error)
    return SeriesResult(value=acc, trunc_error=trunc_error, converged=converged, shells=tuple(shells))


def _non_finite(shells: list[ShellTerm], *, label: str, mu: int) -> SeriesResult:
    logger.warning("series_non_finite", label=label, mu=mu, value=shells[-1].value)
    return SeriesResult(value=math.nan, trunc_error=math.inf, converged=False, shells=tuple(shells))
