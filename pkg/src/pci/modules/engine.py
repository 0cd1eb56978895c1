"""Series engine for correlated integrands.

An :class:`Integrand` is a product of one-electron charge distributions
(each K- or H-weighted) and interelectronic factors ``r_ij^k``:

* ``k = −1`` uses the Neumann expansion of 1/r12,
* ``k = +1`` uses the bilinear r12 expansion with its U/V/W/X terms,
* ``k ≥ 2`` peels off r_ij², which is separable, and recurses.

Every edge contributes ``Σ_μ Σ_σ`` with ``P_μ^{|σ|}`` factors on both
electrons, an azimuthal phase ``e^{iσ(φ_i−φ_j)}`` and a radial companion
``Ω(ξ_>)`` evaluated at the larger of the two ξ's.  The φ integrals fix
the orders: along a spanning tree of the edge graph every σ follows from
the orbitals' m, and one order per independent cycle is summed.

For a fixed set of degrees and orders the remaining radial integral runs
over all orderings of the electrons' ξ.  It is accumulated by a recursion
over subsets: ``G_S(y) = ∫_1^y Σ_{k∈S} d_k Π_{j∈S∖k} Ω_kj G_{S∖k}``,
where electron k is the outermost of S.  The full set gives the value.

Usage
-----
::

    integrand = Integrand(
        electrons=(Electron(a), Electron(b)),
        edges=(Edge(0, 1, -1),),
    )
    result = evaluate_integrand(integrand, R=1.4, ctrl=SeriesControls())
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
import structlog

from pci.core.errors import ParityUnsupported, UnsupportedIntegral
from pci.modules.grid import RadialGrid
from pci.modules.kernels import DensityBuilder, Factor, kernel_H, kernel_K, parity_admissible, tilde_variants
from pci.modules.orbitals import OrbitalParams, Shift
from pci.modules.series import SeriesControls, SeriesResult, combine, product, sum_shells
from pci.modules.specfun import LegendreIndex, harris_coefficients, omega

logger = structlog.get_logger()

FloatArray = npt.NDArray[np.float64]
Weighting = Literal["K", "H"]
Mode = Literal["base", "tilde"]

# Extra ξ powers allowed for when choosing z_max (tilde degrees, r² shifts).
_GRID_POWER_MARGIN = 8


# ── Integrand description ───────────────────────────────────
@dataclass(frozen=True, order=True)
class Electron:
    """One electron's charge distribution; ``H`` drops the ξ²−η² volume factor."""

    orbital: OrbitalParams
    weight: Weighting = "K"


@dataclass(frozen=True, order=True)
class Edge:
    """Factor ``r_ij^power`` between electrons i and j."""

    i: int
    j: int
    power: int


@dataclass(frozen=True)
class Integrand:
    """``coefficient · ∫ Π electrons · Π edges`` over all electrons."""

    electrons: tuple[Electron, ...]
    edges: tuple[Edge, ...] = ()
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        n = len(self.electrons)
        if n == 0:
            raise UnsupportedIntegral("an integrand needs at least one electron")
        for e in self.edges:
            if not (0 <= e.i < n and 0 <= e.j < n) or e.i == e.j:
                raise UnsupportedIntegral(f"edge ({e.i}, {e.j}) does not join two of {n} electrons")


# ── r² peeling ──────────────────────────────────────────────
_NONE = Shift()
_SQUARE_TERMS: tuple[tuple[float, Shift, Shift], ...] = (
    (1.0, Shift(p=2), _NONE),
    (1.0, Shift(q=2), _NONE),
    (1.0, _NONE, Shift(p=2)),
    (1.0, _NONE, Shift(q=2)),
    (-2.0, _NONE, _NONE),
    (-2.0, Shift(p=1, q=1), Shift(p=1, q=1)),
    (-1.0, Shift(gamma=1, nu=1, m=1), Shift(gamma=1, nu=1, m=-1)),
    (-1.0, Shift(gamma=1, nu=1, m=-1), Shift(gamma=1, nu=1, m=1)),
)


def square_terms(i: int, j: int) -> tuple[tuple[float, dict[int, Shift]], ...]:
    """``(2/R)² r_ij²`` as separable ``(coefficient, {electron: shift})`` terms."""
    return tuple((c, {i: si, j: sj}) for c, si, sj in _SQUARE_TERMS)


def _merge_edges(edges: Sequence[Edge]) -> dict[tuple[int, int], int]:
    merged: dict[tuple[int, int], int] = {}
    for e in edges:
        key = (min(e.i, e.j), max(e.i, e.j))
        merged[key] = merged.get(key, 0) + e.power
    return {k: v for k, v in merged.items() if v != 0}


def _expand(integrand: Integrand, R: float) -> list[Integrand]:  # noqa: N803
    """Split off r² factors until every edge power is ±1."""
    edges = _merge_edges(integrand.edges)
    for (i, j), power in sorted(edges.items()):
        if power <= -2:
            raise UnsupportedIntegral(f"r{i + 1}{j + 1}^{power} has no series expansion here")
        if power >= 2:
            out: list[Integrand] = []
            rest = dict(edges)
            rest[(i, j)] = power - 2
            for coeff, shifts in square_terms(i, j):
                electrons = tuple(
                    Electron(shifts[k].apply(el.orbital), el.weight) if k in shifts else el
                    for k, el in enumerate(integrand.electrons)
                )
                out += _expand(
                    Integrand(
                        electrons=electrons,
                        edges=tuple(Edge(a, b, p) for (a, b), p in sorted(rest.items()) if p),
                        coefficient=integrand.coefficient * coeff * (R / 2.0) ** 2,
                    ),
                    R,
                )
            return out
    return [
        Integrand(
            electrons=integrand.electrons,
            edges=tuple(Edge(a, b, p) for (a, b), p in sorted(edges.items())),
            coefficient=integrand.coefficient,
        )
    ]


# ── Azimuthal orders ────────────────────────────────────────
@dataclass(frozen=True)
class _Topology:
    """Spanning tree of a connected component's edge graph."""

    size: int
    edges: tuple[Edge, ...]
    peel: tuple[tuple[int, int], ...]  # (electron, edge to its parent), leaves first
    chords: tuple[int, ...]

    @classmethod
    def of(cls, size: int, edges: tuple[Edge, ...]) -> _Topology:
        incident: dict[int, list[int]] = {v: [] for v in range(size)}
        for idx, e in enumerate(edges):
            incident[e.i].append(idx)
            incident[e.j].append(idx)
        parent: dict[int, int] = {}
        seen = {0}
        order: list[int] = []
        queue = deque([0])
        while queue:
            v = queue.popleft()
            order.append(v)
            for idx in incident[v]:
                e = edges[idx]
                w = e.j if e.i == v else e.i
                if w not in seen:
                    seen.add(w)
                    parent[w] = idx
                    queue.append(w)
        tree = set(parent.values())
        chords = tuple(idx for idx in range(len(edges)) if idx not in tree)
        peel = tuple((v, parent[v]) for v in reversed(order) if v in parent)
        return cls(size=size, edges=edges, peel=peel, chords=chords)

    def orders(self, degrees: Sequence[int], ms: Sequence[int]) -> Iterator[tuple[int, ...]]:
        """Signed orders σ_e with ``m_v + Σ_e s_{e,v} σ_e = 0`` at every electron and |σ_e| ≤ μ_e.

        ``s_{e,v}`` is +1 at the edge's first electron and −1 at its second.
        """
        ranges = [range(-degrees[c], degrees[c] + 1) for c in self.chords]
        for free in itertools.product(*ranges):
            sigma: list[int | None] = [None] * len(self.edges)
            for c, s in zip(self.chords, free, strict=True):
                sigma[c] = s
            ok = True
            for v, up in self.peel:
                acc = ms[v]
                for idx, e in enumerate(self.edges):
                    if idx != up and v in (e.i, e.j):
                        acc += (1 if e.i == v else -1) * sigma[idx]  # type: ignore[operator]
                s_up = 1 if self.edges[up].i == v else -1
                value = -acc * s_up
                if abs(value) > degrees[up]:
                    ok = False
                    break
                sigma[up] = value
            if ok:
                yield tuple(sigma)  # type: ignore[arg-type]


def _degree_tuples(shell: int, count: int) -> Iterator[tuple[int, ...]]:
    for degrees in itertools.product(range(shell + 1), repeat=count):
        if max(degrees) == shell:
            yield degrees


# ── Evaluation context ──────────────────────────────────────
@dataclass
class _Workspace:
    grid: RadialGrid
    builder: DensityBuilder
    omegas: dict[tuple[str, int, int], FloatArray] = field(default_factory=dict)

    def omega(self, kind: str, mu: int, sigma: int) -> FloatArray:
        key = (kind, mu, sigma)
        cached = self.omegas.get(key)
        if cached is None:
            cached = omega(kind, mu, sigma, self.grid.z)  # type: ignore[arg-type]
            self.omegas[key] = cached
        return cached


EdgeChoice = tuple[float, Mode, Mode, str]


def _edge_choices(power: int, mu: int, sigma: int) -> tuple[EdgeChoice, ...]:
    h = harris_coefficients(LegendreIndex(mu, sigma))
    if power == -1:
        return (((2 * mu + 1) * h.Z, "base", "base", "F"),)
    choices: list[EdgeChoice] = [(1.0, "tilde", "base", "F"), (1.0, "base", "tilde", "F")]
    if h.X != 0.0:
        choices.append((h.X, "base", "base", "G"))
    return tuple(choices)


class _Component:
    """One connected group of electrons joined by ±1 edges."""

    def __init__(self, electrons: tuple[Electron, ...], edges: tuple[Edge, ...], space: _Workspace) -> None:
        self.electrons = electrons
        self.edges = edges
        self.space = space
        self.topology = _Topology.of(len(electrons), edges)
        self._densities: dict[tuple[int, tuple[tuple[int, int, str], ...]], FloatArray | None] = {}

    def _density(self, v: int, spec: tuple[tuple[int, int, str], ...]) -> FloatArray | None:
        key = (v, spec)
        if key in self._densities:
            return self._densities[key]
        el = self.electrons[v]
        choices = [tilde_variants(mu, s) if mode == "tilde" else ((1.0, mu, mu),) for mu, s, mode in spec]
        total = np.zeros(self.space.grid.size)
        for combo in itertools.product(*choices):
            factors = tuple(sorted(Factor(x, e, s) for (_, x, e), (_, s, _) in zip(combo, spec, strict=True)))
            coeff = math.prod(c for c, _, _ in combo)
            total += coeff * self.space.builder.density(el.orbital, factors, el.weight == "K")
        out = total if np.any(total) else None
        self._densities[key] = out
        return out

    def _nested(self, densities: Sequence[FloatArray], omegas: dict[tuple[int, int], FloatArray]) -> float:
        n = len(densities)
        full = (1 << n) - 1
        partial: dict[int, FloatArray] = {}
        grid = self.space.grid
        for mask in range(1, full + 1):
            integrand: FloatArray | None = None
            for k in range(n):
                if not mask >> k & 1:
                    continue
                rest = mask & ~(1 << k)
                f = densities[k]
                for j in range(n):
                    if rest >> j & 1:
                        om = omegas.get((min(k, j), max(k, j)))
                        if om is not None:
                            f = f * om
                if rest:
                    f = f * partial[rest]
                integrand = f if integrand is None else integrand + f
            assert integrand is not None
            if mask == full:
                return float(grid.total(integrand))
            partial[mask] = grid.prefix(integrand)
        raise AssertionError("unreachable")

    def term(self, degrees: Sequence[int], orders: Sequence[int]) -> float:
        """Reduced value of one (μ, σ) assignment, summed over edge expansion terms."""
        options = [
            _edge_choices(e.power, mu, abs(s)) for e, mu, s in zip(self.edges, degrees, orders, strict=True)
        ]
        values: list[float] = []
        for combo in itertools.product(*options):
            specs: list[list[tuple[int, int, str]]] = [[] for _ in self.electrons]
            omegas: dict[tuple[int, int], FloatArray] = {}
            for e, mu, s, (_, mode_i, mode_j, kind) in zip(self.edges, degrees, orders, combo, strict=True):
                specs[e.i].append((mu, abs(s), mode_i))
                specs[e.j].append((mu, abs(s), mode_j))
                omegas[(e.i, e.j)] = self.space.omega(kind, mu, abs(s))
            densities = []
            for v, spec in enumerate(specs):
                d = self._density(v, tuple(sorted(spec)))
                if d is None:
                    break
                densities.append(d)
            else:
                values.append(math.prod(c for c, _, _, _ in combo) * self._nested(densities, omegas))
        return math.fsum(values)

    def series(self, ctrl: SeriesControls, label: str) -> SeriesResult:
        ms = [el.orbital.m for el in self.electrons]

        def shell(n: int) -> tuple[float, int]:
            values: list[float] = []
            for degrees in _degree_tuples(n, len(self.edges)):
                for orders in self.topology.orders(degrees, ms):
                    values.append(self.term(degrees, orders))
            return math.fsum(values), len(values)

        return sum_shells(shell, ctrl, label=label)


def _components(size: int, edges: Sequence[Edge]) -> list[list[int]]:
    parent = list(range(size))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in edges:
        parent[find(e.i)] = find(e.j)
    groups: dict[int, list[int]] = {}
    for v in range(size):
        groups.setdefault(find(v), []).append(v)
    return [sorted(g) for g in sorted(groups.values())]


class _Evaluation:
    """State shared by all integrands of one :func:`evaluate_integrand` call."""

    def __init__(self, R: float, ctrl: SeriesControls, label: str) -> None:  # noqa: N803
        self.R = R
        self.ctrl = ctrl
        self.label = label
        self._spaces: dict[tuple[float, int], _Workspace] = {}
        self._results: dict[tuple[tuple[Electron, ...], tuple[Edge, ...]], SeriesResult] = {}

    def _space(self, electrons: Sequence[Electron]) -> _Workspace:
        alpha_min = min(el.orbital.alpha for el in electrons)
        power = max(el.orbital.p + el.orbital.gamma for el in electrons) + _GRID_POWER_MARGIN
        key = (alpha_min, power)
        space = self._spaces.get(key)
        if space is None:
            grid = RadialGrid.for_orbitals(self.ctrl.grid, alpha_min, power)
            space = _Workspace(grid=grid, builder=DensityBuilder(grid))
            self._spaces[key] = space
        return space

    def _isolated(self, el: Electron) -> SeriesResult:
        if el.orbital.m != 0:
            return SeriesResult.zero()
        kernel = kernel_K if el.weight == "K" else kernel_H
        return SeriesResult.exact(kernel(0, 0, 0, el.orbital))

    def component(self, electrons: tuple[Electron, ...], edges: tuple[Edge, ...]) -> SeriesResult:
        """Reduced value (no R or 2π factors) of one connected component."""
        key = (electrons, edges)
        cached = self._results.get(key)
        if cached is not None:
            return cached
        if sum(el.orbital.m for el in electrons) != 0:
            result = SeriesResult.zero()
        elif not edges:
            result = self._isolated(electrons[0])
        else:
            result = _Component(electrons, edges, self._space(electrons)).series(self.ctrl, self.label)
        self._results[key] = result
        return result

    def integrand(self, integrand: Integrand) -> SeriesResult:
        for el in integrand.electrons:
            if not parity_admissible(el.orbital):
                raise ParityUnsupported(el.orbital.gamma, el.orbital.nu, abs(el.orbital.m))
        results: list[SeriesResult] = []
        scale = integrand.coefficient
        for group in _components(len(integrand.electrons), integrand.edges):
            local = {v: k for k, v in enumerate(group)}
            electrons = tuple(integrand.electrons[v] for v in group)
            edges = tuple(Edge(local[e.i], local[e.j], e.power) for e in integrand.edges if e.i in local)
            if sum(el.orbital.m for el in electrons) != 0:
                logger.debug("selection_rule_zero", label=self.label, electrons=len(electrons))
                return SeriesResult.zero()
            results.append(self.component(electrons, edges))
            scale *= (self.R**3 / 8.0 * 2.0 * math.pi) ** len(electrons)
            for e in edges:
                scale *= 2.0 / self.R if e.power == -1 else self.R / 2.0
        out = results[0]
        for r in results[1:]:
            out = product(out, r)
        return out.scaled(scale)


def evaluate_integrand(
    integrands: Integrand | Sequence[Integrand],
    R: float,  # noqa: N803
    ctrl: SeriesControls,
    *,
    label: str = "integrand",
) -> SeriesResult:
    """Σ over *integrands* of ``coefficient · ∫ Π Φ · Π r_ij^k dτ``.

    Integrands whose azimuthal indices cannot cancel return an exact zero
    without building any tables.

    Raises
    ------
    ParityUnsupported
        If an electron's γ, ν and |m| do not share a parity.
    UnsupportedIntegral
        For edge powers of −2 or below.
    """
    items = [integrands] if isinstance(integrands, Integrand) else list(integrands)
    evaluation = _Evaluation(R, ctrl, label)
    parts: list[tuple[float, SeriesResult]] = []
    for item in items:
        for expanded in _expand(item, R):
            parts.append((1.0, evaluation.integrand(expanded)))
    return combine(parts)
