"""Radial kernels of the correlated-integral series.

The basic kernel of a charge distribution ``a`` is::

    K^σ_{μ,μ′,a}(z) = ∫_1^z dξ ∫_{−1}^{1} dη (ξ²−η²) P_μ^σ(ξ) P_{μ′}^σ(η) Φ_a(ξ, η)

(the azimuthal factor is integrated by the caller).  ``H`` drops the
ξ²−η² factor.  ``N`` and ``M`` carry two and three Legendre pairs and are
reduced to sums of ``K`` by product linearisation; the tilde transforms
are the U/V/W combinations the r12 expansion produces and are sampled
through :func:`kernel_table` (kinds ``K_tilde``, ``N_tilde``, ``N_dbltilde``,
``M_tilde``, ``M_dbltilde``).

Closed forms
------------
With u = ξ−1 the ξ part ``ξ^p (ξ²−1)^{(γ+σ)/2} d^σP_μ/dξ^σ`` is a
polynomial in u with non-negative coefficients, so its truncated Laplace
moments are positive sums of regularised incomplete gamma functions and
no cancellation occurs.  The η part is a polynomial times e^{βη}; its
monomial moments are positive series in |β|.  Degrees above 60 fall back
to Gauss–Laguerre / Gauss–Legendre quadrature.

Densities
---------
The series engine works with *densities*: the z-derivative of a kernel
for an arbitrary product of Legendre pairs, sampled on a
:class:`~pci.modules.grid.RadialGrid`.  :class:`DensityBuilder` caches the
Legendre tables and the densities of one evaluation.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Literal

import numpy as np
import numpy.typing as npt
import structlog
from numpy.polynomial import Legendre
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy import special

from pci.core.errors import DomainRangeError, KernelConsistencyError, ParityUnsupported
from pci.modules.grid import GridSpec, RadialGrid, z_max_for
from pci.modules.orbitals import OrbitalParams
from pci.modules.specfun import (
    GegenbauerIndex,
    LegendreIndex,
    gegenbauer_c,
    harris_coefficients,
    legendre_p_table,
    linearize_product,
)

logger = structlog.get_logger()

FloatArray = npt.NDArray[np.float64]
TableKind = Literal[
    "K", "H", "N", "M", "L", "K_tilde", "N_tilde", "N_dbltilde", "M_tilde", "M_dbltilde"
]
Arity = Literal["K2", "N3", "M4"]

_CLOSED_FORM_MAX_DEGREE = 60
_MONOMIAL_MAX_DEGREE = 16
_ORTHOGONAL_ZERO = 1e-13
_DIRECT_WINDOW = 20.0


# ── Parity ──────────────────────────────────────────────────
def half_powers(a: OrbitalParams, sigma: int) -> tuple[int, int]:
    """(γ+σ)/2 and (ν+σ)/2, or :class:`ParityUnsupported` if either is half-integral."""
    if (a.gamma + sigma) % 2 or (a.nu + sigma) % 2:
        raise ParityUnsupported(a.gamma, a.nu, sigma)
    return (a.gamma + sigma) // 2, (a.nu + sigma) // 2


def parity_admissible(a: OrbitalParams) -> bool:
    """True when γ ≡ ν ≡ |m| (mod 2), the condition every closed form needs."""
    return a.gamma % 2 == a.nu % 2 == abs(a.m) % 2


# ── Exact polynomial pieces ─────────────────────────────────
def _mul(a: Sequence[Fraction | int], b: Sequence[Fraction | int]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


@lru_cache(maxsize=1024)
def legendre_monomials(mu: int, sigma: int) -> tuple[tuple[int, Fraction], ...]:
    """``d^σP_μ/dx^σ = Σ_j c_j x^{μ−σ−2j}`` as ``((power, c_j), …)``."""
    terms = []
    for j in range((mu - sigma) // 2 + 1):
        c = Fraction(
            (-1) ** j * math.factorial(2 * mu - 2 * j),
            2**mu * math.factorial(j) * math.factorial(mu - j) * math.factorial(mu - sigma - 2 * j),
        )
        terms.append((mu - sigma - 2 * j, c))
    return tuple(terms)


@lru_cache(maxsize=4096)
def _xi_polynomial(p: int, half: int, mu: int, sigma: int) -> tuple[float, ...]:
    """``ξ^p (ξ²−1)^half d^σP_μ/dξ^σ`` in powers of u = ξ−1; every coefficient ≥ 0."""
    shifted_xi = [math.comb(p, k) for k in range(p + 1)]
    radial = [0] * half + [math.comb(half, k) * 2 ** (half - k) for k in range(half + 1)]
    legendre = [
        Fraction(math.comb(mu, k) * math.comb(mu + k, k) * math.perm(k, sigma), 2**k) for k in range(sigma, mu + 1)
    ]
    return tuple(float(c) for c in _mul(_mul(shifted_xi, radial), legendre))


@lru_cache(maxsize=4096)
def _eta_polynomial(q: int, half: int, mu: int, sigma: int) -> tuple[float, ...]:
    """``η^q (1−η²)^half d^σP_μ/dη^σ`` in monomials."""
    legendre = [Fraction(0)] * (mu - sigma + 1)
    for power, c in legendre_monomials(mu, sigma):
        legendre[power] = c
    window = [Fraction(0)] * q + [Fraction(1)]
    for _ in range(half):
        window = _mul(window, [1, 0, -1])
    return tuple(float(c) for c in _mul(window, legendre))


# ── ξ moments ───────────────────────────────────────────────
def _xi_moment_closed(coeffs: FloatArray, alpha: float, z: FloatArray) -> FloatArray:
    """∫_1^z Σ c_j (ξ−1)^j e^{−αξ} dξ through regularised incomplete gammas."""
    j = np.arange(coeffs.size, dtype=np.float64)
    scale = np.exp(special.gammaln(j + 1.0) - (j + 1.0) * math.log(alpha) - alpha)
    fractions = special.gammainc((j + 1.0)[:, None], alpha * (z - 1.0)[None, :])
    return (coeffs * scale) @ fractions


@lru_cache(maxsize=32)
def _laguerre_rule(order: int) -> tuple[FloatArray, FloatArray]:
    x, w = special.roots_laguerre(order)
    return np.asarray(x), np.asarray(w)


@lru_cache(maxsize=32)
def _legendre_rule(order: int) -> tuple[FloatArray, FloatArray]:
    return npleg.leggauss(order)


def _xi_moment_quadrature(coeffs: FloatArray, alpha: float, z: FloatArray) -> FloatArray:
    order = (coeffs.size - 1) // 2 + 64
    lx, lw = _laguerre_rule(order)
    gx, gw = _legendre_rule(order)

    def beyond(start: float) -> float:
        # ∫_start^∞ A(1+u) e^{−αu} du
        return math.exp(-alpha * start) * float(np.dot(lw, nppoly.polyval(start + lx / alpha, coeffs))) / alpha

    whole = beyond(0.0)
    out = np.empty_like(z)
    for i, zz in enumerate(z):
        width = zz - 1.0
        if not math.isfinite(width):
            out[i] = whole
        elif alpha * width <= _DIRECT_WINDOW:
            u = 0.5 * width * (gx + 1.0)
            out[i] = 0.5 * width * float(np.dot(gw, nppoly.polyval(u, coeffs) * np.exp(-alpha * u)))
        else:
            out[i] = whole - beyond(width)
    return math.exp(-alpha) * out


def _xi_moments(a: OrbitalParams, half: int, mu: int, sigma: int, z: FloatArray) -> tuple[FloatArray, FloatArray]:
    """(∫A e^{−αξ}, ∫(ξ²−1)A e^{−αξ}) on [1, z] for the ξ polynomial A."""
    base = np.asarray(_xi_polynomial(a.p, half, mu, sigma))
    lifted = np.convolve(base, [0.0, 2.0, 1.0])
    if lifted.size - 1 > _CLOSED_FORM_MAX_DEGREE:
        logger.info("kernel_fallback_quadrature", degree=lifted.size - 1, mu=mu, sigma=sigma, alpha=a.alpha)
        return _xi_moment_quadrature(base, a.alpha, z), _xi_moment_quadrature(lifted, a.alpha, z)
    return _xi_moment_closed(base, a.alpha, z), _xi_moment_closed(lifted, a.alpha, z)


# ── η moments ───────────────────────────────────────────────
@lru_cache(maxsize=1024)
def _monomial_moments(kmax: int, beta: float) -> tuple[float, ...]:
    """∫_{−1}^{1} η^k e^{βη} dη for k = 0..kmax, as positive series in |β|."""
    k = np.arange(kmax + 1)
    b = abs(beta)
    if b == 0.0:
        return tuple(np.where(k % 2 == 0, 2.0 / (k + 1.0), 0.0))
    j = np.arange(int(math.ceil(2.0 * b)) + 60)
    weights = np.exp(j * math.log(b) - special.gammaln(j + 1.0))
    kj = k[:, None] + j[None, :]
    moments = np.where(kj % 2 == 0, 2.0 / (kj + 1.0), 0.0) @ weights
    if beta < 0.0:
        moments = moments * np.where(k % 2 == 0, 1.0, -1.0)
    return tuple(moments)


def _eta_moments(a: OrbitalParams, half: int, mu: int, sigma: int) -> tuple[float, float]:
    """(∫B e^{βη}, ∫(1−η²)B e^{βη}) over [−1, 1] for the η polynomial B."""
    coeffs = np.asarray(_eta_polynomial(a.q, half, mu, sigma))
    lifted = np.convolve(coeffs, [1.0, 0.0, -1.0])
    if lifted.size - 1 <= _MONOMIAL_MAX_DEGREE:
        moments = np.asarray(_monomial_moments(lifted.size - 1, a.beta))
        return (
            math.fsum(coeffs * moments[: coeffs.size]),
            math.fsum(lifted * moments),
        )
    x, w = _legendre_rule(_eta_order(lifted.size - 1, a.beta))
    leg = Legendre.basis(mu)
    values = x**a.q * (1.0 - x * x) ** half * (leg.deriv(sigma) if sigma else leg)(x) * np.exp(a.beta * x)
    return float(np.dot(w, values)), float(np.dot(w, values * (1.0 - x * x)))


def _eta_order(degree: int, beta: float) -> int:
    return 16 * math.ceil((degree / 2 + 32 + abs(beta)) / 16)


# ── K and H ─────────────────────────────────────────────────
def _as_nodes(function: str, z: npt.ArrayLike) -> FloatArray:
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if np.any(zs < 1.0):
        raise DomainRangeError(function, "z", float(np.min(zs)))
    return zs


def kernel_K_values(mu: int, mu_prime: int, sigma: int, a: OrbitalParams, z: npt.ArrayLike) -> FloatArray:  # noqa: N802
    """Vectorised :func:`kernel_K`; ``z`` may contain ``inf``."""
    zs = _as_nodes("kernel_K", z)
    xi_half, eta_half = half_powers(a, sigma)
    if sigma > mu or sigma > mu_prime:
        return np.zeros_like(zs)
    plain, lifted = _xi_moments(a, xi_half, mu, sigma, zs)
    e0, e1 = _eta_moments(a, eta_half, mu_prime, sigma)
    return lifted * e0 + plain * e1


def kernel_H_values(mu: int, mu_prime: int, sigma: int, a: OrbitalParams, z: npt.ArrayLike) -> FloatArray:  # noqa: N802
    """Vectorised :func:`kernel_H`."""
    zs = _as_nodes("kernel_H", z)
    xi_half, eta_half = half_powers(a, sigma)
    if sigma > mu or sigma > mu_prime:
        return np.zeros_like(zs)
    plain, _ = _xi_moments(a, xi_half, mu, sigma, zs)
    e0, _ = _eta_moments(a, eta_half, mu_prime, sigma)
    return plain * e0


def kernel_K(mu: int, mu_prime: int, sigma: int, a: OrbitalParams, z: float = math.inf) -> float:  # noqa: N802
    """K^σ_{μ,μ′,a}(z); ``z=math.inf`` gives the full-range total.

    Raises
    ------
    ParityUnsupported
        If (γ+σ)/2 or (ν+σ)/2 is half-integral.
    """
    return float(kernel_K_values(mu, mu_prime, sigma, a, [z])[0])


def kernel_H(mu: int, mu_prime: int, sigma: int, a: OrbitalParams, z: float = math.inf) -> float:  # noqa: N802
    """H^σ_{μ,μ′,a}(z): :func:`kernel_K` without the ξ²−η² factor."""
    return float(kernel_H_values(mu, mu_prime, sigma, a, [z])[0])


def _xi_power_integral(power: int, alpha: float, z: float) -> float:
    """∫_1^z ξ^S e^{−αξ} dξ."""
    terms = []
    for s in range(power + 1):
        upper = 0.0 if math.isinf(z) else math.exp(-alpha * z) * z ** (power - s)
        terms.append((math.exp(-alpha) - upper) / (alpha ** (s + 1) * math.factorial(power - s)))
    return math.factorial(power) * math.fsum(terms)


def _eta_power_integral(power: int, beta: float) -> float:
    """∫_{−1}^{1} η^V e^{βη} dη."""
    if beta == 0.0:
        return 2.0 / (power + 1) if power % 2 == 0 else 0.0
    sign_v = (-1) ** power
    terms = [
        ((-1) ** n * math.exp(beta) - sign_v * math.exp(-beta)) / (beta ** (n + 1) * math.factorial(power - n))
        for n in range(power + 1)
    ]
    return math.factorial(power) * math.fsum(terms)


def kernel_K_quadruple_sum(mu: int, mu_prime: int, sigma: int, a: OrbitalParams, z: float = math.inf) -> float:  # noqa: N802
    """K^σ_{μ,μ′,a}(z) as the literal quadruple sum over monomials.

    Sums run over the Legendre monomials of both factors (j, k) and the
    binomial expansions of (ξ²−1)^{(γ+σ)/2} (r) and (1−η²)^{(ν+σ)/2} (t),
    in that fixed order.  Alternating, so only trustworthy at low degree.
    """
    if z < 1.0:
        raise DomainRangeError("kernel_K_quadruple_sum", "z", z)
    xi_half, eta_half = half_powers(a, sigma)
    if sigma > mu or sigma > mu_prime:
        return 0.0
    terms: list[float] = []
    for xi_power, cj in legendre_monomials(mu, sigma):
        for r in range(xi_half + 1):
            cr = (-1) ** (xi_half - r) * math.comb(xi_half, r)
            s0 = a.p + xi_power + 2 * r
            for eta_power, ck in legendre_monomials(mu_prime, sigma):
                for t in range(eta_half + 1):
                    ct = (-1) ** t * math.comb(eta_half, t)
                    v0 = a.q + eta_power + 2 * t
                    c = float(cj * ck) * cr * ct
                    terms.append(
                        c
                        * (
                            _xi_power_integral(s0 + 2, a.alpha, z) * _eta_power_integral(v0, a.beta)
                            - _xi_power_integral(s0, a.alpha, z) * _eta_power_integral(v0 + 2, a.beta)
                        )
                    )
    return math.fsum(terms)


# ── Linearised kernels ──────────────────────────────────────
@lru_cache(maxsize=8192)
def _reduce(factors: tuple[tuple[int, int], ...]) -> tuple[int, tuple[tuple[int, float], ...]]:
    """Linearise ``Π P_{deg}^{ord}`` into ``(total order, ((J, b_J), …))``."""
    order = 0
    series: dict[int, float] = {0: 1.0}
    for degree, factor_order in factors:
        if factor_order > degree:
            return order + factor_order, ()
        merged: dict[int, float] = {}
        for j, c in series.items():
            for jj, b in linearize_product(j, order, degree, factor_order):
                merged[jj] = merged.get(jj, 0.0) + c * b
        order += factor_order
        series = merged
    return order, tuple(sorted(series.items()))


def split_kernel_values(
    xi_factors: Sequence[tuple[int, int]],
    eta_factors: Sequence[tuple[int, int]],
    a: OrbitalParams,
    z: npt.ArrayLike,
    *,
    weighted: bool = True,
) -> FloatArray:
    """Σ_J Σ_J′ b_J b′_J′ K^m_{J,J′}(z) for products of (degree, order) pairs.

    The ξ and η products must have the same total order m.
    """
    zs = _as_nodes("split_kernel", z)
    xi_order, xi_series = _reduce(tuple(xi_factors))
    eta_order, eta_series = _reduce(tuple(eta_factors))
    if xi_order != eta_order:
        raise KernelConsistencyError(f"ξ order {xi_order} differs from η order {eta_order}")
    values = kernel_K_values if weighted else kernel_H_values
    total = np.zeros_like(zs)
    for j, bj in xi_series:
        for jp, bjp in eta_series:
            total += bj * bjp * values(j, jp, xi_order, a, zs)
    return total


def kernel_N(mu: int, mu_prime: int, sigma: int, sigma_prime: int, a: OrbitalParams, z: float = math.inf) -> float:  # noqa: N802
    """N^{σ,σ′}_{μ,μ′,a}(z): two Legendre pairs, reduced to K^{σ+σ′} sums."""
    pairs = ((mu, sigma), (mu_prime, sigma_prime))
    return float(split_kernel_values(pairs, pairs, a, [z])[0])


def kernel_M(  # noqa: N802
    mu: int,
    mu_prime: int,
    mu_second: int,
    sigma: int,
    sigma_prime: int,
    sigma_second: int,
    a: OrbitalParams,
    z: float = math.inf,
) -> float:
    """M^{σ,σ′,σ″}_{μ,μ′,μ″,a}(z): three Legendre pairs."""
    pairs = ((mu, sigma), (mu_prime, sigma_prime), (mu_second, sigma_second))
    return float(split_kernel_values(pairs, pairs, a, [z])[0])


# ── Tilde transforms ────────────────────────────────────────
@lru_cache(maxsize=4096)
def tilde_variants(mu: int, sigma: int) -> tuple[tuple[float, int, int], ...]:
    """The U/V/W degree shifts of the r12 expansion as ``(coefficient, ξ degree, η degree)``.

    Variants whose degree falls below σ vanish and are dropped.
    """
    h = harris_coefficients(LegendreIndex(mu, sigma))
    raw = (
        (h.U, mu + 2, mu),
        (h.U, mu, mu + 2),
        (h.V, mu - 2, mu),
        (h.V, mu, mu - 2),
        (h.W, mu, mu),
    )
    return tuple((c, x, e) for c, x, e in raw if c != 0.0 and min(x, e) >= sigma)


def _pairs_from(indices: Sequence[int]) -> list[tuple[int, int]]:
    half = len(indices) // 2
    return list(zip(indices[:half], indices[half:], strict=True))


_ARITY_PAIRS = {"K2": 1, "N3": 2, "M4": 3}


def _transform(arity: Arity, indices: Sequence[int], a: OrbitalParams, z: npt.ArrayLike, tilded: int) -> FloatArray:
    if arity not in _ARITY_PAIRS:
        raise KernelConsistencyError(f"unknown arity {arity!r}")
    pairs = _pairs_from(indices)
    if len(pairs) != _ARITY_PAIRS[arity] or tilded > len(pairs):
        raise KernelConsistencyError(f"{arity} needs {_ARITY_PAIRS[arity]} (μ, σ) pairs, got {indices!r}")
    zs = _as_nodes("kernel_table", z)
    choices: list[tuple[tuple[float, int, int], ...]] = [
        tilde_variants(mu, sigma) if i < tilded else ((1.0, mu, mu),) for i, (mu, sigma) in enumerate(pairs)
    ]
    total = np.zeros_like(zs)
    for combo in _product(choices):
        coeff = math.prod(c for c, _, _ in combo)
        xi = [(x, sigma) for (_, x, _), (_, sigma) in zip(combo, pairs, strict=True)]
        eta = [(e, sigma) for (_, _, e), (_, sigma) in zip(combo, pairs, strict=True)]
        total += coeff * split_kernel_values(xi, eta, a, zs)
    return total


def _product(choices: Sequence[Sequence[tuple[float, int, int]]]) -> list[tuple[tuple[float, int, int], ...]]:
    combos: list[tuple[tuple[float, int, int], ...]] = [()]
    for options in choices:
        combos = [c + (o,) for c in combos for o in options]
    return combos


def _tilde_transform(arity: Arity, indices: Sequence[int], a: OrbitalParams, z: npt.ArrayLike) -> FloatArray:
    """K̃ (``K2``), Ñ (``N3``) or M̃ (``M4``): U/V/W shifts on the first pair.

    *indices* lists the degrees then the orders, e.g. ``(μ, μ′, σ, σ′)``.
    """
    return _transform(arity, indices, a, z, tilded=1)


def _dbltilde_transform(arity: Arity, indices: Sequence[int], a: OrbitalParams, z: npt.ArrayLike) -> FloatArray:
    """N≈ (``N3``) or M≈ (``M4``): U/V/W shifts on the first two pairs."""
    return _transform(arity, indices, a, z, tilded=2)


# ── Gegenbauer kernels ──────────────────────────────────────
def _eta_rule(degree: int, beta: float, odd: bool) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights in η; an odd power of √(1−η²) switches to η = cos θ."""
    order = _eta_order(degree, beta)
    t, w = _legendre_rule(order)
    if not odd:
        return t, w
    theta = 0.5 * math.pi * (t + 1.0)
    return np.cos(theta), 0.5 * math.pi * w * np.sin(theta)


def _eta_pair(values: FloatArray, x: FloatArray, w: FloatArray) -> tuple[float, float]:
    e0 = float(np.dot(w, values))
    e1 = float(np.dot(w, values * (1.0 - x * x)))
    scale = float(np.dot(w, np.abs(values)))
    if abs(e0) < _ORTHOGONAL_ZERO * scale:
        e0 = 0.0
    if abs(e1) < _ORTHOGONAL_ZERO * scale:
        e1 = 0.0
    return e0, e1


def _xi_envelope(a: OrbitalParams, z: FloatArray) -> FloatArray:
    return z**a.p * np.power(z * z - 1.0, 0.5 * a.gamma) * np.exp(-a.alpha * z)


def _combine(xi_part: FloatArray, z: FloatArray, e0: float, e1: float, weighted: bool) -> FloatArray:
    if weighted:
        return xi_part * ((z * z - 1.0) * e0 + e1)
    return xi_part * e0


def gegenbauer_density(
    n: int, n_prime: int, l: float, s: OrbitalParams, z: npt.ArrayLike, *, volume: bool = False  # noqa: E741
) -> FloatArray:
    """z-derivative of :func:`kernel_L` at the nodes *z* (all > 1)."""
    zs = np.asarray(z, dtype=np.float64)
    x, w = _eta_rule(s.q + s.nu + n_prime + 2, s.beta, odd=bool(s.nu % 2))
    eta = (
        x**s.q
        * np.power(np.maximum(1.0 - x * x, 0.0), 0.5 * s.nu)
        * np.exp(s.beta * x)
        * gegenbauer_c(GegenbauerIndex(n_prime, l), x)
    )
    e0, e1 = _eta_pair(eta, x, w)
    xi_part = _xi_envelope(s, zs) * gegenbauer_c(GegenbauerIndex(n, l), zs)
    return _combine(xi_part, zs, e0, e1, volume)


def kernel_L(  # noqa: N802
    n: int, n_prime: int, l: float, s: OrbitalParams, z: float = math.inf, *, volume: bool = False  # noqa: E741
) -> float:
    """L^l_{n,n′,s}(z) = ∫_1^z ∫ Φ_s C_n^l(ξ) C_{n′}^l(η) by panel quadrature.

    With *volume* the ξ²−η² factor of the volume element is included.
    """
    if z < 1.0:
        raise DomainRangeError("kernel_L", "z", z)
    if z == 1.0:
        return 0.0
    top = z if math.isfinite(z) else z_max_for(s.alpha, s.p + s.gamma + n + 2)
    grid = RadialGrid.build(GridSpec(), top)
    return float(grid.total(gegenbauer_density(n, n_prime, l, s, grid.z, volume=volume)))


# ── Tables ──────────────────────────────────
@dataclass(frozen=True, eq=False)
class KernelTable:
    """A kernel sampled on a radial grid, with its value at z → ∞."""

    kind: TableKind
    indices: tuple[int, ...]
    orbital: OrbitalParams
    grid: RadialGrid = field(repr=False)
    values: FloatArray = field(repr=False)
    total_at_infinity: float

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.size,):
            raise KernelConsistencyError(f"{self.kind} table has shape {self.values.shape}, grid has {self.grid.size}")


def _k_table(idx: Sequence[int], a: OrbitalParams, z: FloatArray) -> FloatArray:
    return kernel_K_values(idx[0], idx[1], idx[2], a, z)


def _h_table(idx: Sequence[int], a: OrbitalParams, z: FloatArray) -> FloatArray:
    return kernel_H_values(idx[0], idx[1], idx[2], a, z)


def _n_table(idx: Sequence[int], a: OrbitalParams, z: FloatArray) -> FloatArray:
    pairs = _pairs_from(idx)
    return split_kernel_values(pairs, pairs, a, z)


_TABLE_BUILDERS: dict[str, Callable[[Sequence[int], OrbitalParams, FloatArray], FloatArray]] = {
    "K": _k_table,
    "H": _h_table,
    "N": _n_table,
    "M": _n_table,
    "K_tilde": lambda idx, a, z: _tilde_transform("K2", idx, a, z),
    "N_tilde": lambda idx, a, z: _tilde_transform("N3", idx, a, z),
    "N_dbltilde": lambda idx, a, z: _dbltilde_transform("N3", idx, a, z),
    "M_tilde": lambda idx, a, z: _tilde_transform("M4", idx, a, z),
    "M_dbltilde": lambda idx, a, z: _dbltilde_transform("M4", idx, a, z),
}


def kernel_table(kind: TableKind, indices: Sequence[int], a: OrbitalParams, grid: RadialGrid) -> KernelTable:
    """Sample a closed-form kernel on *grid*.

    *indices* follow the kernel's signature: ``(μ, μ′, σ)`` for K and H,
    degrees then orders for N, M and the tilde kinds (``(μ, σ)`` for K̃).
    """
    builder = _TABLE_BUILDERS.get(kind)
    if builder is None:
        raise KernelConsistencyError(f"no closed-form table of kind {kind!r}")
    values = builder(tuple(indices), a, np.append(grid.z, math.inf))
    return KernelTable(kind, tuple(indices), a, grid, values[:-1], float(values[-1]))


def gegenbauer_table(n: int, l: float, s: OrbitalParams, grid: RadialGrid) -> KernelTable:  # noqa: E741
    """L^l_{n,n,s} with the volume factor on *grid*."""
    dens = gegenbauer_density(n, n, l, s, grid.z, volume=True)
    return KernelTable("L", (n, n), s, grid, grid.prefix(dens), float(grid.total(dens)))


# ── Densities for the series engine ─────────────────────────
@dataclass(frozen=True, order=True)
class Factor:
    """One Legendre pair ``P^σ_{ξ-degree}(ξ)·P^σ_{η-degree}(η)``."""

    xi_degree: int
    eta_degree: int
    order: int


class DensityBuilder:
    """Densities of one evaluation on one grid, with their Legendre tables cached.

    ``density(a, factors, weighted)`` is the z-derivative of the kernel
    ``∫∫ [ξ²−η²] Φ_a Π P^σ(ξ) P^σ(η)``, the bracket present when
    *weighted*.  Moments that vanish by orthogonality to 1e−13 of their
    absolute scale are set to exactly zero.
    """

    def __init__(self, grid: RadialGrid) -> None:
        self.grid = grid
        self._xi_tables: dict[int, FloatArray] = {}
        self._eta_tables: dict[tuple[int, bool, int], FloatArray] = {}
        self._densities: dict[tuple[OrbitalParams, tuple[Factor, ...], bool], FloatArray] = {}

    def _xi_row(self, degree: int, order: int) -> FloatArray:
        table = self._xi_tables.get(order)
        if table is None or table.shape[0] <= degree:
            table = legendre_p_table(degree + 8, order, self.grid.z)
            self._xi_tables[order] = table
        return table[degree]

    def _eta_row(self, x: FloatArray, key: tuple[int, bool], degree: int, order: int) -> FloatArray:
        table = self._eta_tables.get((*key, order))
        if table is None or table.shape[0] <= degree:
            table = legendre_p_table(degree + 8, order, x, domain="on_cut")
            self._eta_tables[(*key, order)] = table
        return table[degree]

    def density(self, a: OrbitalParams, factors: tuple[Factor, ...], weighted: bool = True) -> FloatArray:
        key = (a, factors, weighted)
        cached = self._densities.get(key)
        if cached is not None:
            return cached

        total_order = sum(f.order for f in factors)
        odd = bool((a.nu + total_order) % 2)
        degree = a.q + a.nu + 2 + sum(f.eta_degree for f in factors)
        rule_order = _eta_order(degree, a.beta)
        x, w = _eta_rule(degree, a.beta, odd)

        eta = x**a.q * np.power(np.maximum(1.0 - x * x, 0.0), 0.5 * a.nu) * np.exp(a.beta * x)
        xi_part = _xi_envelope(a, self.grid.z)
        for f in factors:
            eta = eta * self._eta_row(x, (rule_order, odd), f.eta_degree, f.order)
            xi_part = xi_part * self._xi_row(f.xi_degree, f.order)
        e0, e1 = _eta_pair(eta, x, w)
        out = _combine(xi_part, self.grid.z, e0, e1, weighted)
        self._densities[key] = out
        return out


def density(a: OrbitalParams, factors: Sequence[Factor], grid: RadialGrid, *, weighted: bool = True) -> FloatArray:
    """One-shot :meth:`DensityBuilder.density`."""
    return DensityBuilder(grid).density(a, tuple(factors), weighted)
