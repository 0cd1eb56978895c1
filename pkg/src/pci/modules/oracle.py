"""Brute-force integrators that cross-check the series values.

Nothing here shares code with the series assembly beyond pointwise
orbital evaluation and coordinate maps:

* :func:`monte_carlo` samples any engine :class:`Integrand` with
  ξ_i − 1 ~ Exp(α_i) and η, φ uniform; the ξ²−η² volume factor is part of
  the integrand.  Samples are drawn in fixed-size chunks, each from its
  own ``SeedSequence`` child, and reduced in chunk order, so estimates are
  bit-identical for a seed whatever the thread count.
* :func:`oracle_two_electron` and :func:`oracle_one_electron` are tensor
  Gauss–Laguerre × Gauss–Legendre rules.
* :func:`oracle_pointwise_laplacian` and :func:`oracle_kinetic` take the
  Laplacian by finite differences.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
import numpy.typing as npt
import structlog

from pci.core.errors import DomainRangeError, OracleDensityMismatch, OracleUsageError
from pci.core.models import IntegralKind, Verdict
from pci.modules.engine import Integrand
from pci.modules.integrals import integrand_for
from pci.modules.orbitals import OrbitalParams, cartesian, evaluate, evaluate_many, multiply, spheroidal

logger = structlog.get_logger()

FloatArray = npt.NDArray[np.float64]

CHUNK_SIZE = 65_536
MIN_MANY_ELECTRON_SAMPLES = 1_000_000
# Samples with a singular factor closer than this (in units of R) are rejected.
_COALESCENCE = 1e-10
# Cartesian step of the kinetic oracle, in units of R.
_KINETIC_STEP = 1e-3


@dataclass(frozen=True)
class OracleEstimate:
    """An independent estimate; ``standard_error`` is 0 for deterministic rules."""

    value: float
    standard_error: float = 0.0
    evaluations: int = 0
    seed: int | None = None
    rejected: int = 0

    def verdict(self, series_value: float, *, sigmas: float = 3.0, rel_tol: float = 1e-6) -> Verdict:
        """``pass`` when *series_value* lies within 3σ (MC) or rel_tol (deterministic)."""
        diff = abs(series_value - self.value)
        scale = max(abs(series_value), abs(self.value))
        if self.standard_error > 0.0:
            ok = diff <= sigmas * self.standard_error + 1e-14 * scale
        else:
            ok = diff <= rel_tol * scale
        return Verdict.PASS if ok else Verdict.FAIL


# ── Monte Carlo ─────────────────────────────────────────────
@dataclass(frozen=True)
class _ChunkTotals:
    total: float
    total_sq: float
    count: int
    rejected: int
    nonfinite: int


def _sample_chunk(
    integrand: Integrand,
    R: float,  # noqa: N803
    count: int,
    seed: np.random.SeedSequence,
) -> _ChunkTotals:
    rng = np.random.default_rng(seed)
    n = len(integrand.electrons)
    rates = np.array([el.orbital.alpha for el in integrand.electrons])
    xi = 1.0 + rng.exponential(1.0, size=(count, n)) / rates
    eta = rng.uniform(-1.0, 1.0, size=(count, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=(count, n))

    # proposal density: Π α e^{−α(ξ−1)} · ½ · 1/(2π)
    log_q = np.sum(np.log(rates) - rates * (xi - 1.0), axis=1) - n * math.log(4.0 * math.pi)
    value = np.full(count, integrand.coefficient * (R**3 / 8.0) ** n, dtype=np.complex128)
    for i, el in enumerate(integrand.electrons):
        value *= evaluate_many(el.orbital, xi[:, i], eta[:, i], phi[:, i])
        if el.weight == "K":
            value *= xi[:, i] ** 2 - eta[:, i] ** 2

    points = cartesian(xi, eta, phi, R)
    keep = np.ones(count, dtype=bool)
    for e in integrand.edges:
        r = np.linalg.norm(points[:, e.i] - points[:, e.j], axis=-1)
        if e.power < 0:
            keep &= r >= _COALESCENCE * R
            r = np.where(keep, r, 1.0)
        value *= r**e.power

    f = np.where(keep, value.real * np.exp(-log_q), 0.0)
    finite = np.isfinite(f)
    f = np.where(finite, f, 0.0)
    return _ChunkTotals(
        total=float(np.sum(f)),
        total_sq=float(np.sum(f * f)),
        count=count,
        rejected=int(count - np.count_nonzero(keep)),
        nonfinite=int(count - np.count_nonzero(finite)),
    )


def monte_carlo(
    integrand: Integrand,
    R: float,  # noqa: N803
    samples: int,
    seed: int,
    *,
    threads: int = 1,
) -> OracleEstimate:
    """Importance-sampled estimate of ``∫ integrand dτ₁…dτ_n``.

    Raises
    ------
    OracleUsageError
        If *samples* is not positive.
    OracleDensityMismatch
        If the integrand is not finite at sampled points, i.e. the
        proposal covers a region where the integrand is undefined.
    """
    return _reduce_chunks(
        lambda count, child: _sample_chunk(integrand, R, count, child), samples, seed, threads, method="mc"
    )


def _reduce_chunks(
    worker: Callable[[int, np.random.SeedSequence], _ChunkTotals],
    samples: int,
    seed: int,
    threads: int,
    *,
    method: str,
) -> OracleEstimate:
    """Run *worker* over seeded chunks and fold the totals in chunk order."""
    if samples < 1:
        raise OracleUsageError(f"samples must be >= 1, got {samples}")
    sizes = [CHUNK_SIZE] * (samples // CHUNK_SIZE)
    if samples % CHUNK_SIZE:
        sizes.append(samples % CHUNK_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        chunks = list(pool.map(worker, sizes, children))

    nonfinite = sum(c.nonfinite for c in chunks)
    if nonfinite:
        raise OracleDensityMismatch(f"integrand not finite at {nonfinite} of {samples} sampled points")
    mean = math.fsum(c.total for c in chunks) / samples
    mean_sq = math.fsum(c.total_sq for c in chunks) / samples
    stderr = math.sqrt(max(mean_sq - mean * mean, 0.0) / max(samples - 1, 1))
    rejected = sum(c.rejected for c in chunks)
    logger.debug("oracle_finished", method=method, value=mean, stderr=stderr, samples=samples, rejected=rejected)
    return OracleEstimate(value=mean, standard_error=stderr, evaluations=samples, seed=seed, rejected=rejected)


def oracle_many_electron(
    kind: IntegralKind,
    orbitals: Sequence[OrbitalParams],
    R: float,  # noqa: N803
    samples: int,
    seed: int,
    *,
    threads: int = 1,
) -> OracleEstimate:
    """Monte Carlo estimate of a three- or four-electron kind."""
    if kind.electron_count not in (3, 4):
        raise OracleUsageError(f"{kind.value} is not a three- or four-electron kind")
    if samples < MIN_MANY_ELECTRON_SAMPLES:
        raise OracleUsageError(f"many-electron estimates need >= {MIN_MANY_ELECTRON_SAMPLES} samples, got {samples}")
    return monte_carlo(integrand_for(kind, orbitals), R, samples, seed, threads=threads)


# ── Deterministic rules ─────────────────────────────────────
@lru_cache(maxsize=16)
def _laguerre(order: int) -> tuple[FloatArray, FloatArray]:
    """Nodes t and weights for ∫_0^∞ g(t) dt (the e^{−t} already folded in)."""
    t, w = np.polynomial.laguerre.laggauss(order)
    return t, w * np.exp(t)


@lru_cache(maxsize=16)
def _legendre(order: int) -> tuple[FloatArray, FloatArray]:
    return np.polynomial.legendre.leggauss(order)


def _xi_rule(alpha: float, order: int) -> tuple[FloatArray, FloatArray]:
    t, w = _laguerre(order)
    return 1.0 + t / alpha, w / alpha


def oracle_two_electron(
    kind: IntegralKind,
    a: OrbitalParams,
    b: OrbitalParams,
    R: float,  # noqa: N803
    order: int = 24,
) -> OracleEstimate:
    """Five-dimensional tensor rule for ⟨Φ_a(1)Φ_b(2) r12^k⟩.

    The integrand depends on φ₁, φ₂ only through Δ = φ₁ − φ₂ and is even
    in Δ, so the azimuths reduce to ``4π ∫_0^π Re(...) dΔ``.
    """
    if kind.electron_count != 2:
        raise OracleUsageError(f"{kind.value} is not a two-electron kind")
    if order < 2:
        raise OracleUsageError(f"rule order must be >= 2, got {order}")
    power = integrand_for(kind, (a, b)).edges[0].power
    if a.m + b.m != 0:
        return OracleEstimate(value=0.0)

    xa, wa = _xi_rule(a.alpha, order)
    xb, wb = _xi_rule(b.alpha, order)
    y, wy = _legendre(order)
    delta = 0.5 * math.pi * (y + 1.0)
    wd = 0.5 * math.pi * wy

    # electron 2 at φ = 0 on a (ξ₂, η₂, Δ) mesh; electron 1 at φ = Δ
    xi2, eta2, dphi = np.meshgrid(xb, y, delta, indexing="ij")
    w2 = np.einsum("i,j,k->ijk", wb, wy, wd)
    f2 = (evaluate_many(b, xi2, eta2, np.zeros_like(dphi)) * (xi2**2 - eta2**2)).real * w2
    p2 = cartesian(xi2, eta2, np.zeros_like(dphi), R)

    partial: list[float] = []
    for x1, w1 in zip(xa, wa, strict=True):
        for e1, we in zip(y, wy, strict=True):
            p1 = cartesian(np.full_like(dphi, x1), np.full_like(dphi, e1), dphi, R)
            r12 = np.linalg.norm(p1 - p2, axis=-1)
            phase = evaluate(a, x1, e1, 0.0).real * np.cos(a.m * dphi)
            partial.append(w1 * we * (x1 * x1 - e1 * e1) * float(np.sum(phase * f2 * r12**power)))
    value = 4.0 * math.pi * (R**3 / 8.0) ** 2 * math.fsum(partial)
    logger.debug("oracle_finished", method="tensor", kind=kind.value, value=value, order=order)
    return OracleEstimate(value=value, evaluations=order**5)


Operator = Literal["overlap", "attraction"]


def oracle_one_electron(
    e: OrbitalParams,
    operator: Operator,
    R: float,  # noqa: N803
    order: int = 48,
    *,
    Z_a: float = 1.0,  # noqa: N803
    Z_b: float = 1.0,  # noqa: N803
) -> OracleEstimate:
    """∫Φ_e dτ or ∫Φ_e (−Z_a/r_a − Z_b/r_b) dτ by a 2-D rule (φ exact).

    Nucleus a is at z = +R/2; the distances come from Cartesian points.
    """
    if operator not in ("overlap", "attraction"):
        raise OracleUsageError(f"unknown one-electron operator {operator!r}")
    if e.m != 0:
        return OracleEstimate(value=0.0)
    xs, wx = _xi_rule(e.alpha, order)
    y, wy = _legendre(order)
    xi, eta = np.meshgrid(xs, y, indexing="ij")
    w = np.outer(wx, wy)
    phi = np.zeros_like(xi)
    f = evaluate_many(e, xi, eta, phi).real * (xi**2 - eta**2)
    if operator == "attraction":
        p = cartesian(xi, eta, phi, R)
        r_a = np.linalg.norm(p - np.array([0.0, 0.0, 0.5 * R]), axis=-1)
        r_b = np.linalg.norm(p - np.array([0.0, 0.0, -0.5 * R]), axis=-1)
        f = f * (-Z_a / r_a - Z_b / r_b)
    value = 2.0 * math.pi * R**3 / 8.0 * float(np.sum(w * f))
    return OracleEstimate(value=value, evaluations=order * order)


# ── Laplacians ──────────────────────────────────────────────
def _prolate_d(a: OrbitalParams, xi: float, eta: float, phi: float, h: float) -> complex:
    """(ξ²−η²)-scaled Laplacian ratio by central differences of step h."""

    def f(x: float, y: float, z: float) -> complex:
        return evaluate(a, x, y, z)

    c = f(xi, eta, phi)
    d_xi = (f(xi + h, eta, phi) - f(xi - h, eta, phi)) / (2 * h)
    d_xi2 = (f(xi + h, eta, phi) - 2 * c + f(xi - h, eta, phi)) / (h * h)
    d_eta = (f(xi, eta + h, phi) - f(xi, eta - h, phi)) / (2 * h)
    d_eta2 = (f(xi, eta + h, phi) - 2 * c + f(xi, eta - h, phi)) / (h * h)
    d_phi2 = (f(xi, eta, phi + h) - 2 * c + f(xi, eta, phi - h)) / (h * h)
    radial = (xi * xi - 1.0) * d_xi2 + 2.0 * xi * d_xi
    angular = (1.0 - eta * eta) * d_eta2 - 2.0 * eta * d_eta
    azimuthal = (xi * xi - eta * eta) / ((xi * xi - 1.0) * (1.0 - eta * eta)) * d_phi2
    return (radial + angular + azimuthal) / c


def oracle_pointwise_laplacian(
    a: OrbitalParams,
    point: tuple[float, float, float],
    *,
    h: float = 1e-4,
) -> float:
    """``D_a = (R/2)²(ξ²−η²)∇²Φ_a/Φ_a`` at *point* = (ξ, η, φ).

    Second-order central differences at h and h/2, Richardson-extrapolated.

    Raises
    ------
    DomainRangeError
        If the stencil would leave ξ > 1, |η| < 1, or Φ_a vanishes there.
    """
    xi, eta, phi = point
    if not xi > 1.0 + h:
        raise DomainRangeError("oracle_pointwise_laplacian", "xi", xi)
    if not abs(eta) < 1.0 - h:
        raise DomainRangeError("oracle_pointwise_laplacian", "eta", eta)
    if evaluate(a, xi, eta, phi) == 0:
        raise DomainRangeError("oracle_pointwise_laplacian", "phi_a", 0.0)
    coarse = _prolate_d(a, xi, eta, phi, h)
    fine = _prolate_d(a, xi, eta, phi, 0.5 * h)
    return float(((4.0 * fine - coarse) / 3.0).real)


def _kinetic_chunk(
    bra: Sequence[OrbitalParams],
    ket: Sequence[OrbitalParams],
    l: int,  # noqa: E741
    l_prime: int,
    bra_pair: int,
    R: float,  # noqa: N803
    count: int,
    seed: np.random.SeedSequence,
) -> _ChunkTotals:
    rng = np.random.default_rng(seed)
    n = len(bra)
    dists = [multiply(b, k) for b, k in zip(bra, ket, strict=True)]
    rates = np.array([d.alpha for d in dists])
    xi = 1.0 + rng.exponential(1.0, size=(count, n)) / rates
    eta = rng.uniform(-1.0, 1.0, size=(count, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=(count, n))
    log_q = np.sum(np.log(rates) - rates * (xi - 1.0), axis=1) - n * math.log(4.0 * math.pi)
    points = cartesian(xi, eta, phi, R)

    def inner(p1: np.ndarray) -> np.ndarray:
        x1, y1, z1 = spheroidal(p1, R)
        value = evaluate_many(ket[0], x1, y1, z1)
        if l:
            value = value * np.linalg.norm(p1 - points[:, 1], axis=-1) ** l
        return value

    h = _KINETIC_STEP * R
    centre = inner(points[:, 0])
    lap = np.zeros(count, dtype=np.complex128)
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        lap += inner(points[:, 0] + step) + inner(points[:, 0] - step) - 2.0 * centre
    lap /= h * h

    value = -0.5 * lap * evaluate_many(bra[0], xi[:, 0], eta[:, 0], phi[:, 0])
    value *= xi[:, 0] ** 2 - eta[:, 0] ** 2
    for i in range(1, n):
        value *= evaluate_many(dists[i], xi[:, i], eta[:, i], phi[:, i]) * (xi[:, i] ** 2 - eta[:, i] ** 2)
    if l_prime:
        value *= np.linalg.norm(points[:, 0] - points[:, bra_pair - 1], axis=-1) ** l_prime
    value *= (R**3 / 8.0) ** n

    f = value.real * np.exp(-log_q)
    finite = np.isfinite(f)
    f = np.where(finite, f, 0.0)
    return _ChunkTotals(
        total=float(np.sum(f)),
        total_sq=float(np.sum(f * f)),
        count=count,
        rejected=0,
        nonfinite=int(count - np.count_nonzero(finite)),
    )


def oracle_kinetic(
    bra: Sequence[OrbitalParams],
    ket: Sequence[OrbitalParams],
    l: int,  # noqa: E741
    l_prime: int,
    bra_pair: int,
    R: float,  # noqa: N803
    samples: int,
    seed: int,
    *,
    threads: int = 1,
) -> OracleEstimate:
    """Monte Carlo ⟨Φ_bra r_{1k}^{l′} | −½∇₁² | r12^l Φ_ket⟩ with a Cartesian 7-point Laplacian."""
    if len(bra) != len(ket) or not bra:
        raise OracleUsageError("bra and ket need the same, non-zero number of orbitals")
    if (l and len(bra) < 2) or (l_prime and len(bra) < bra_pair):
        raise OracleUsageError(f"(l, l′) = ({l}, {l_prime}) needs more electrons than {len(bra)}")
    return _reduce_chunks(
        lambda count, child: _kinetic_chunk(bra, ket, l, l_prime, bra_pair, R, count, child),
        samples,
        seed,
        threads,
        method="mc_kinetic",
    )
