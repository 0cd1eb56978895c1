"""Composite Gauss–Legendre radial grid on z ∈ [1, z_max].

Every kernel table, weight and accumulant of one integral lives on the
same :class:`RadialGrid`.  Panels are geometrically graded away from
z = 1, where kernels vanish like powers of (z−1) and the Q/P ratios
carry a logarithm, and uniform further out.

Running integrals use a per-panel spectral matrix: the panel values are
mapped to Legendre coefficients, integrated exactly, and evaluated back
at the same nodes.  Panel totals use the Gauss weights, so prefix(z) +
tail(z) equals the total at every node by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from numpy.polynomial import legendre as npleg

from pci.core.errors import KernelConsistencyError

FloatArray = npt.NDArray[np.float64]

# Tail bound used to pick z_max: e^{−α(z−1)} z^P below ~1e−16 of scale.
_TAIL_DECADES = 40.0


@dataclass(frozen=True)
class GridSpec:
    """Parameters of the radial grid (independent of the orbitals)."""

    outer_panels: int = 64
    nodes_per_panel: int = 16
    first_step: float = 1e-8
    growth: float = 2.0

    def __post_init__(self) -> None:
        if self.outer_panels < 1:
            raise KernelConsistencyError(f"outer_panels={self.outer_panels} must be >= 1")
        if self.nodes_per_panel < 2:
            raise KernelConsistencyError(f"nodes_per_panel={self.nodes_per_panel} must be >= 2")
        if not self.first_step > 0.0:
            raise KernelConsistencyError(f"first_step={self.first_step} must be > 0")
        if not self.growth > 1.0:
            raise KernelConsistencyError(f"growth={self.growth} must be > 1")

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """Parse ``PANELS:NODES`` (the ``--grid`` flag)."""
        try:
            panels, nodes = (int(part) for part in text.split(":"))
        except ValueError as exc:
            raise KernelConsistencyError(f"grid must look like PANELS:NODES, got {text!r}") from exc
        return cls(outer_panels=panels, nodes_per_panel=nodes)

    def refined(self) -> GridSpec:
        """Same panels, twice the nodes (refinement checks)."""
        return GridSpec(self.outer_panels, 2 * self.nodes_per_panel, self.first_step, self.growth)


def z_max_for(alpha_min: float, max_power: int) -> float:
    """z_max = 1 + (40 + P)/α_min."""
    return 1.0 + (_TAIL_DECADES + max_power) / alpha_min


@lru_cache(maxsize=16)
def _reference_rule(order: int) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Nodes, weights and the running-integral matrix on [−1, 1]."""
    x, w = npleg.leggauss(order)
    vander = npleg.legvander(x, order - 1)
    to_coeffs = np.linalg.solve(vander, np.eye(order))
    integrated = npleg.legint(to_coeffs, lbnd=-1, axis=0)
    running = npleg.legvander(x, order) @ integrated
    return x, w, running


def _breakpoints(spec: GridSpec, z_max: float) -> FloatArray:
    width = (z_max - 1.0) / spec.outer_panels
    edges = [1.0]
    step = spec.first_step
    while step < width and 1.0 + step < z_max:
        edges.append(1.0 + step)
        step *= spec.growth
    start = edges[-1]
    count = max(1, math.ceil((z_max - start) / width - 1e-12))
    uniform = np.linspace(start, z_max, count + 1)
    return np.concatenate([np.asarray(edges[:-1]), uniform])


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Panels tiling [1, z_max] with Gauss–Legendre nodes.

    Attributes
    ----------
    edges:
        Panel boundaries, ``edges[0] == 1`` and ``edges[-1] == z_max``.
    nodes, weights:
        Shape ``(panels, nodes_per_panel)``.
    """

    spec: GridSpec
    z_max: float
    edges: FloatArray = field(repr=False)
    nodes: FloatArray = field(repr=False)
    weights: FloatArray = field(repr=False)

    @classmethod
    def build(cls, spec: GridSpec, z_max: float) -> RadialGrid:
        if z_max <= 1.0:
            raise KernelConsistencyError(f"z_max={z_max} must exceed 1")
        edges = _breakpoints(spec, z_max)
        x, w, _ = _reference_rule(spec.nodes_per_panel)
        half = 0.5 * np.diff(edges)[:, None]
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        return cls(spec=spec, z_max=float(z_max), edges=edges, nodes=mid + half * x, weights=half * w)

    @classmethod
    def for_orbitals(cls, spec: GridSpec, alpha_min: float, max_power: int) -> RadialGrid:
        return cls.build(spec, z_max_for(alpha_min, max_power))

    # ── Shape ───────────────────────────────────────────────
    @property
    def panels(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def z(self) -> FloatArray:
        """All nodes, flattened in ascending order."""
        return self.nodes.ravel()

    @property
    def w(self) -> FloatArray:
        return self.weights.ravel()

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def check_same(self, other: RadialGrid) -> None:
        if other is not self and not (
            other.spec == self.spec and other.z_max == self.z_max and np.array_equal(other.edges, self.edges)
        ):
            raise KernelConsistencyError("tables sampled on different radial grids")

    # ── Integration ─────────────────────────────────────────
    def _panels_of(self, values: npt.ArrayLike) -> FloatArray:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[-1] != self.size:
            raise KernelConsistencyError(f"expected {self.size} node values, got {arr.shape[-1]}")
        return arr.reshape(*arr.shape[:-1], self.panels, self.spec.nodes_per_panel)

    def panel_totals(self, values: npt.ArrayLike) -> FloatArray:
        return np.einsum("...pk,pk->...p", self._panels_of(values), self.weights)

    def total(self, values: npt.ArrayLike) -> FloatArray | float:
        """∫_1^{z_max} f dz."""
        totals = self.panel_totals(values)
        return float(totals.sum()) if totals.ndim == 1 else totals.sum(axis=-1)

    def prefix_at_edges(self, values: npt.ArrayLike) -> FloatArray:
        """∫_1^{edge} f dz at every panel boundary (first entry 0)."""
        totals = self.panel_totals(values)
        zero = np.zeros((*totals.shape[:-1], 1))
        return np.concatenate([zero, np.cumsum(totals, axis=-1)], axis=-1)

    def prefix(self, values: npt.ArrayLike) -> FloatArray:
        """∫_1^{z_i} f dz at every node."""
        _, _, running = _reference_rule(self.spec.nodes_per_panel)
        panels = self._panels_of(values)
        half = 0.5 * np.diff(self.edges)[:, None]
        inside = half * np.einsum("ij,...pj->...pi", running, panels)
        offsets = self.prefix_at_edges(values)[..., :-1, None]
        return (inside + offsets).reshape(*panels.shape[:-2], self.size)

    def tail(self, values: npt.ArrayLike) -> FloatArray:
        """∫_{z_i}^{z_max} f dz = total − prefix."""
        prefix = self.prefix(values)
        edges = self.prefix_at_edges(values)
        return edges[..., -1:] - prefix
