"""Two-, three- and four-electron matrix elements over charge distributions.

Each electron carries a charge distribution (a product of a bra and a ket
basis function) given as an :class:`OrbitalParams`.  The two-electron
kinds are assembled directly from kernel tables::

    ⟨1/r12⟩   = π²R⁵/8  Σ_μ (2μ+1) Z ∫ F K_a K_b
    ⟨r12⟩     = π²R⁷/32 Σ_μ [T(a,b) + T(b,a)],  T(a,b) = ∫ K_a F K̃_b + ½X ∫ G K_a K_b
    ⟨r12²⟩    = separable (R/2)² Σ c·S(a′)·S(b′)
    ⟨r12³⟩    = (R/2)² Σ c·⟨r12⟩(a′, b′)
    ⟨1/r12²⟩  = π²R⁴/2  ΣΣ (Gegenbauer L kernels)

Outer integrals run to z_max; the remainder is closed with the companion
``Ω(z_max)`` times the kernels' totals.  ⟨1/r12³⟩ diverges for overlapping
distributions and is rejected with :class:`UnsupportedIntegral`.  The
three- and four-electron kinds go through :mod:`pci.modules.engine`.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np
import structlog

from pci.core.errors import DomainRangeError, ParityUnsupported, UnsupportedIntegral
from pci.core.models import IntegralKind
from pci.modules.engine import Edge, Electron, Integrand, evaluate_integrand, square_terms
from pci.modules.grid import RadialGrid
from pci.modules.kernels import (
    gegenbauer_table,
    kernel_H,
    kernel_K,
    kernel_table,
    parity_admissible,
)
from pci.modules.orbitals import OrbitalParams, shift
from pci.modules.series import SeriesControls, SeriesResult, combine, product, sum_shells
from pci.modules.specfun import (
    LegendreIndex,
    gegenbauer_log_weight,
    gegenbauer_tail,
    harris_coefficients,
    log_factorial,
    omega,
    weight_kernels,
)

logger = structlog.get_logger()

# Headroom on the ξ power used to place z_max.
_GRID_POWER_MARGIN = 8

# Operand of every kind as edges (i, j, power) over electron slots.
_EDGES: dict[IntegralKind, tuple[tuple[int, int, int], ...]] = {
    IntegralKind.INV_R12: ((0, 1, -1),),
    IntegralKind.R12: ((0, 1, 1),),
    IntegralKind.R12_SQ: ((0, 1, 2),),
    IntegralKind.R12_CUB: ((0, 1, 3),),
    IntegralKind.INV_R12_SQ: ((0, 1, -2),),
    IntegralKind.INV_R12_CUB: ((0, 1, -3),),
    IntegralKind.R12_R13: ((0, 1, 1), (0, 2, 1)),
    IntegralKind.R12_OVER_R13: ((0, 1, 1), (0, 2, -1)),
    IntegralKind.R12R13_OVER_R23: ((0, 1, 1), (0, 2, 1), (1, 2, -1)),
    IntegralKind.R13SQ_OVER_R12: ((0, 2, 2), (0, 1, -1)),
    IntegralKind.INV_R12_R13: ((0, 1, -1), (0, 2, -1)),
    IntegralKind.R12R13_OVER_R14: ((0, 1, 1), (0, 2, 1), (0, 3, -1)),
    IntegralKind.R23R14_OVER_R12: ((1, 2, 1), (0, 3, 1), (0, 1, -1)),
    IntegralKind.R23R12_OVER_R14: ((1, 2, 1), (0, 1, 1), (0, 3, -1)),
}

# Kinds whose operand is unchanged by swapping electrons 2 and 3.
_SWAP_BC = frozenset(
    {
        IntegralKind.R12_R13,
        IntegralKind.R12R13_OVER_R23,
        IntegralKind.INV_R12_R13,
        IntegralKind.R12R13_OVER_R14,
    }
)


# ── Kind bookkeeping ────────────────────────────────────────
def integrand_for(kind: IntegralKind, orbitals: Sequence[OrbitalParams]) -> Integrand:
    """The operand of *kind* over *orbitals* as an engine integrand.

    Also used by the oracles, which evaluate the same edges pointwise.
    """
    edges = _EDGES.get(kind)
    if edges is None:
        raise UnsupportedIntegral(f"{kind.value} is not a correlated many-electron kind")
    if len(orbitals) != kind.electron_count:
        raise UnsupportedIntegral(f"{kind.value} needs {kind.electron_count} orbitals, got {len(orbitals)}")
    return Integrand(
        electrons=tuple(Electron(o) for o in orbitals),
        edges=tuple(Edge(i, j, p) for i, j, p in edges),
    )


def canonical_orbitals(kind: IntegralKind, orbitals: Sequence[OrbitalParams]) -> tuple[OrbitalParams, ...]:
    """Order symmetric slots so that swapped requests share one evaluation."""
    out = tuple(orbitals)
    if kind.electron_count == 2:
        return tuple(sorted(out))
    if kind in _SWAP_BC:
        return (out[0], *sorted(out[1:3]), *out[3:])
    if kind is IntegralKind.R23R14_OVER_R12:
        a, b, c, d = out
        return min((a, b, c, d), (b, a, d, c))
    return out


def _check_request(kind: IntegralKind, orbitals: Sequence[OrbitalParams], R: float, ctrl: SeriesControls) -> None:  # noqa: N803
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainRangeError(kind.value, "R", R)
    largest = max(abs(o.m) for o in orbitals)
    if ctrl.mu_max < largest:
        raise DomainRangeError(kind.value, "mu_max", float(ctrl.mu_max))


def _selection_zero(kind: IntegralKind, orbitals: Sequence[OrbitalParams]) -> bool:
    total = sum(o.m for o in orbitals)
    if total != 0:
        logger.debug("selection_rule_zero", kind=kind.value, m_total=total)
        return True
    return False


def _require_parity(*orbitals: OrbitalParams) -> None:
    for o in orbitals:
        if not parity_admissible(o):
            raise ParityUnsupported(o.gamma, o.nu, abs(o.m))


def _grid(orbitals: Sequence[OrbitalParams], ctrl: SeriesControls, extra: int = 0) -> RadialGrid:
    alpha_min = min(o.alpha for o in orbitals)
    power = max(o.p + o.gamma for o in orbitals) + _GRID_POWER_MARGIN + extra
    return RadialGrid.for_orbitals(ctrl.grid, alpha_min, power)


def _at_edge(values: np.ndarray) -> float:
    return float(np.asarray(values).ravel()[0])


def charge_total(a: OrbitalParams, R: float, *, weighted: bool = True) -> float:  # noqa: N803
    """∫Φ_a dτ (or its H-weighted analogue); zero unless m = 0."""
    if a.m != 0:
        return 0.0
    kernel = kernel_K if weighted else kernel_H
    return R**3 / 8.0 * 2.0 * math.pi * kernel(0, 0, 0, a)


# ── Two-electron routes ─────────────────────────────────────
def _inv_r12(a: OrbitalParams, b: OrbitalParams, R: float, ctrl: SeriesControls) -> SeriesResult:  # noqa: N803
    sigma = abs(a.m)
    grid = _grid((a, b), ctrl)
    z = grid.z

    def shell(mu: int) -> tuple[float, int]:
        if mu < sigma:
            return 0.0, 0
        idx = LegendreIndex(mu, sigma)
        ka = kernel_table("K", (mu, mu, sigma), a, grid)
        kb = kernel_table("K", (mu, mu, sigma), b, grid)
        body = grid.total(weight_kernels("F", idx, z) * ka.values * kb.values)
        tail = ka.total_at_infinity * kb.total_at_infinity * _at_edge(omega("F", mu, sigma, grid.z_max))
        return (2 * mu + 1) * harris_coefficients(idx).Z * math.fsum([body, tail]), 1

    result = sum_shells(shell, ctrl, label="inv_r12")
    return result.scaled(math.pi**2 * R**5 / 8.0)


def _r12(a: OrbitalParams, b: OrbitalParams, R: float, ctrl: SeriesControls) -> SeriesResult:  # noqa: N803
    sigma = abs(a.m)
    grid = _grid((a, b), ctrl, extra=4)
    z = grid.z

    def half(k: np.ndarray, k_inf: float, kt: np.ndarray, kt_inf: float, f: np.ndarray, tail: float) -> float:
        return math.fsum([grid.total(k * f * kt), k_inf * kt_inf * tail])

    def shell(mu: int) -> tuple[float, int]:
        if mu < sigma:
            return 0.0, 0
        idx = LegendreIndex(mu, sigma)
        h = harris_coefficients(idx)
        ka = kernel_table("K", (mu, mu, sigma), a, grid)
        kb = kernel_table("K", (mu, mu, sigma), b, grid)
        kta = kernel_table("K_tilde", (mu, sigma), a, grid)
        ktb = kernel_table("K_tilde", (mu, sigma), b, grid)
        f = weight_kernels("F", idx, z)
        f_tail = _at_edge(omega("F", mu, sigma, grid.z_max))
        parts = [
            half(ka.values, ka.total_at_infinity, ktb.values, ktb.total_at_infinity, f, f_tail),
            half(kb.values, kb.total_at_infinity, kta.values, kta.total_at_infinity, f, f_tail),
        ]
        if h.X != 0.0:
            pi = ka.values * kb.values
            pi_inf = ka.total_at_infinity * kb.total_at_infinity
            if mu == 0:
                x_part = math.fsum([pi_inf, grid.total(pi_inf - pi)])
            else:
                g_tail = _at_edge(omega("G", mu, sigma, grid.z_max))
                x_part = math.fsum([grid.total(weight_kernels("G", idx, z) * pi), pi_inf * g_tail])
            parts.append(h.X * x_part)
        return math.fsum(parts), 1

    result = sum_shells(shell, ctrl, label="r12")
    return result.scaled(math.pi**2 * R**7 / 32.0)


def _r12_sq(a: OrbitalParams, b: OrbitalParams, R: float) -> SeriesResult:  # noqa: N803
    values = []
    for coeff, shifts in square_terms(0, 1):
        sa, sb = shifts[0].apply(a), shifts[1].apply(b)
        if sa.m != 0 or sb.m != 0:
            continue
        _require_parity(sa, sb)
        values.append(coeff * charge_total(sa, R) * charge_total(sb, R))
    return SeriesResult.exact((R / 2.0) ** 2 * math.fsum(values))


def _r12_cub(a: OrbitalParams, b: OrbitalParams, R: float, ctrl: SeriesControls) -> SeriesResult:  # noqa: N803
    parts: list[tuple[float, SeriesResult]] = []
    for coeff, shifts in square_terms(0, 1):
        sa, sb = shifts[0].apply(a), shifts[1].apply(b)
        parts.append((coeff * (R / 2.0) ** 2, two_electron(IntegralKind.R12, sa, sb, R, ctrl)))
    return combine(parts)


def _inv_r12_sq(a: OrbitalParams, b: OrbitalParams, R: float, ctrl: SeriesControls) -> SeriesResult:  # noqa: N803
    m = abs(a.m)
    grid = _grid((a, b), ctrl, extra=ctrl.mu_max)
    z = grid.z

    def coefficient(n: int, l: int) -> float:  # noqa: E741
        log_c = (
            2 * log_factorial(l)
            + log_factorial(n - l)
            + math.log(n + 1)
            + math.log(2 * l + 1)
            - log_factorial(n + l + 1)
            + log_factorial(l - m)
            + log_factorial(l + m)
            - 2 * log_factorial((l - m) // 2)
            - 2 * log_factorial((l + m) // 2)
        )
        return math.exp(log_c)

    def weighted(la: np.ndarray, lb: np.ndarray, log_weight: np.ndarray) -> np.ndarray:
        # the weight blows up like (z−1)^{−l−3/2} where the tables vanish, so
        # the product is formed from logarithms
        with np.errstate(divide="ignore"):
            log_mag = np.log(np.abs(la)) + np.log(np.abs(lb)) + log_weight
        return np.sign(la) * np.sign(lb) * np.exp(log_mag)

    def shell(n: int) -> tuple[float, int]:
        values = []
        for l in range(m, n + 1):  # noqa: E741
            if (l + m) % 2:
                continue
            la = gegenbauer_table(n - l, l + 1, shift(a, gamma=l, nu=l), grid)
            lb = gegenbauer_table(n - l, l + 1, shift(b, gamma=l, nu=l), grid)
            body = grid.total(weighted(la.values, lb.values, gegenbauer_log_weight(n - l, l + 1, z)))
            tail = la.total_at_infinity * lb.total_at_infinity * gegenbauer_tail(n - l, l + 1, grid.z_max)
            values.append(coefficient(n, l) * math.fsum([body, tail]))
        return math.fsum(values), len(values)

    result = sum_shells(shell, ctrl, label="inv_r12_sq")
    return result.scaled(math.pi**2 * R**4 / 2.0)


_TwoRoute = Callable[[OrbitalParams, OrbitalParams, float, SeriesControls], SeriesResult]

_TWO_ELECTRON: dict[IntegralKind, _TwoRoute] = {
    IntegralKind.INV_R12: _inv_r12,
    IntegralKind.R12: _r12,
    IntegralKind.R12_SQ: lambda a, b, R, ctrl: _r12_sq(a, b, R),
    IntegralKind.R12_CUB: _r12_cub,
    IntegralKind.INV_R12_SQ: _inv_r12_sq,
}


def two_electron(
    kind: IntegralKind,
    a: OrbitalParams,
    b: OrbitalParams,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """⟨Φ_a(1) Φ_b(2) · operand(r12)⟩ for a two-electron *kind*.

    Returns an exact zero when m_a + m_b ≠ 0.  A series that reaches
    ``ctrl.mu_max`` comes back with ``converged=False``.

    Raises
    ------
    UnsupportedIntegral
        If *kind* is not a two-electron kind, or is ``inv_r12_cub``: 1/r12³
        is not absolutely integrable over overlapping charge distributions.
    ParityUnsupported
        If a distribution's γ, ν and |m| do not share a parity.
    """
    if kind is IntegralKind.INV_R12_CUB:
        raise UnsupportedIntegral(
            "inv_r12_cub: 1/r12³ is not absolutely integrable over overlapping charge distributions"
        )
    route = _TWO_ELECTRON.get(kind)
    if route is None:
        raise UnsupportedIntegral(f"{kind.value} is not a two-electron kind")
    _check_request(kind, (a, b), R, ctrl)
    if _selection_zero(kind, (a, b)):
        return SeriesResult.zero()
    a, b = canonical_orbitals(kind, (a, b))
    if kind is not IntegralKind.R12_SQ:
        _require_parity(a, b)
    return route(a, b, R, ctrl)


# ── Three- and four-electron kinds ──────────────────────────
def _r13sq_over_r12(
    a: OrbitalParams, b: OrbitalParams, c: OrbitalParams, R: float, ctrl: SeriesControls  # noqa: N803
) -> SeriesResult:
    """r13² split into separable pieces on electrons 1 and 3, each times ⟨1/r12⟩."""
    parts: list[tuple[float, SeriesResult]] = []
    for coeff, shifts in square_terms(0, 2):
        sa, sc = shifts[0].apply(a), shifts[2].apply(c)
        if sc.m != 0 or sa.m + b.m != 0:
            continue
        _require_parity(sc)
        overlap = SeriesResult.exact(charge_total(sc, R))
        parts.append((coeff * (R / 2.0) ** 2, product(two_electron(IntegralKind.INV_R12, sa, b, R, ctrl), overlap)))
    return combine(parts)


def many_electron(
    kind: IntegralKind,
    orbitals: Sequence[OrbitalParams],
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """Three- and four-electron kinds through the series engine."""
    if kind.electron_count not in (3, 4):
        raise UnsupportedIntegral(f"{kind.value} is not a three- or four-electron kind")
    if len(orbitals) != kind.electron_count:
        raise UnsupportedIntegral(f"{kind.value} needs {kind.electron_count} orbitals, got {len(orbitals)}")
    _check_request(kind, orbitals, R, ctrl)
    if _selection_zero(kind, orbitals):
        return SeriesResult.zero()
    ordered = canonical_orbitals(kind, orbitals)
    if kind is IntegralKind.R13SQ_OVER_R12:
        return _r13sq_over_r12(*ordered, R, ctrl)
    return evaluate_integrand(integrand_for(kind, ordered), R, ctrl, label=kind.value)


def three_electron(
    kind: IntegralKind,
    a: OrbitalParams,
    b: OrbitalParams,
    c: OrbitalParams,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """⟨Φ_a(1) Φ_b(2) Φ_c(3) · operand⟩ for a three-electron *kind*."""
    if kind.electron_count != 3:
        raise UnsupportedIntegral(f"{kind.value} is not a three-electron kind")
    return many_electron(kind, (a, b, c), R, ctrl)


def four_electron(
    kind: IntegralKind,
    a: OrbitalParams,
    b: OrbitalParams,
    c: OrbitalParams,
    d: OrbitalParams,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """⟨Φ_a(1) Φ_b(2) Φ_c(3) Φ_d(4) · operand⟩ for a four-electron *kind*."""
    if kind.electron_count != 4:
        raise UnsupportedIntegral(f"{kind.value} is not a four-electron kind")
    return many_electron(kind, (a, b, c, d), R, ctrl)


def matrix_element(
    kind: IntegralKind,
    orbitals: Sequence[OrbitalParams],
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """Dispatch a correlated *kind* on its electron count."""
    if kind.electron_count == 2:
        if len(orbitals) != 2:
            raise UnsupportedIntegral(f"{kind.value} needs 2 orbitals, got {len(orbitals)}")
        return two_electron(kind, orbitals[0], orbitals[1], R, ctrl)
    return many_electron(kind, orbitals, R, ctrl)
