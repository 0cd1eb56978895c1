"""Special functions and coupling coefficients for prolate-spheroidal integrals.

Conventions
-----------
* ``P_μ^σ`` carries no Condon–Shortley phase.  Off the cut (x ≥ 1) it is
  ``(x²−1)^{σ/2} d^σP_μ/dx^σ`` and therefore positive for x > 1; on the cut
  (|x| ≤ 1) the factor is ``(1−x²)^{σ/2}``.
* ``Q_μ^σ(z) = (z²−1)^{σ/2} d^σQ_μ/dz^σ`` for z > 1, whose sign is (−1)^σ.

Everything here is a pure function of its arguments; coefficient tables are
memoised with :func:`functools.lru_cache` and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.polynomial import Legendre
from scipy import special

from pci.core.errors import DomainRangeError

Cut = Literal["off_cut", "on_cut"]
WeightKind = Literal["F", "G", "little_l", "F2", "E2", "G2"]
FloatArray = npt.NDArray[np.float64]

# Switch to the hypergeometric tail once (z+√(z²−1))^{2μ+1} exceeds this.
_Q_FAR_RATIO = 1.0e4
_Q_SERIES_MAX_TERMS = 20_000
_EXACT_FACTORIAL_LIMIT = 20


# ── Index types ─────────────────────────────────────────────
@dataclass(frozen=True)
class LegendreIndex:
    """Degree μ and order σ of an associated Legendre function (0 ≤ σ ≤ μ)."""

    degree: int
    order: int

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise DomainRangeError("LegendreIndex", "degree", self.degree)
        if not 0 <= self.order <= self.degree:
            raise DomainRangeError("LegendreIndex", "order", self.order)


@dataclass(frozen=True)
class GegenbauerIndex:
    """Degree n and superscript l ≥ ½ of a Gegenbauer polynomial C_n^l."""

    degree: int
    superscript: float

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise DomainRangeError("GegenbauerIndex", "degree", self.degree)
        if self.superscript < 0.5:
            raise DomainRangeError("GegenbauerIndex", "superscript", self.superscript)


@dataclass(frozen=True)
class HarrisCoefficients:
    """U, V, W, X, Z coefficients of the bilinear r12 expansion for one (μ, σ)."""

    U: float
    V: float
    W: float
    X: float
    Z: float


# ── Factorials ──────────────────────────────────────────────
@lru_cache(maxsize=512)
def log_factorial(n: int) -> float:
    """ln(n!), exact through 20! and via ``gammaln`` above."""
    if n < 0:
        raise DomainRangeError("log_factorial", "n", n)
    if n <= _EXACT_FACTORIAL_LIMIT:
        return math.log(math.factorial(n))
    return float(special.gammaln(n + 1.0))


def _double_factorial_odd(sigma: int) -> float:
    """(2σ−1)!!, with (−1)!! = 1."""
    return float(math.prod(range(1, 2 * sigma, 2)))


# ── Legendre functions of the first kind ────────────────────
def _check_cut(function: str, x: FloatArray, domain: Cut) -> None:
    if domain == "off_cut":
        if np.any(x < 1.0):
            raise DomainRangeError(function, "x", float(np.min(x)))
    elif domain == "on_cut":
        if np.any(np.abs(x) > 1.0):
            raise DomainRangeError(function, "x", float(np.max(np.abs(x))))
    else:
        raise DomainRangeError(function, "domain", float("nan"))


def legendre_p_table(mu_max: int, sigma: int, x: npt.ArrayLike, domain: Cut = "off_cut") -> FloatArray:
    """Tabulate ``P_μ^σ(x)`` for μ = 0..mu_max at fixed order σ.

    Rows with μ < σ are zero.  The table is filled by the upward recurrence
    ``(μ−σ+1)P_{μ+1} = (2μ+1)xP_μ − (μ+σ)P_{μ−1}`` seeded with
    ``P_σ^σ = (2σ−1)!!·(±(x²−1))^{σ/2}``.

    Returns
    -------
    ndarray
        Shape ``(mu_max + 1, len(x))``.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_cut("legendre_p_table", xs, domain)
    if sigma < 0:
        raise DomainRangeError("legendre_p_table", "sigma", sigma)

    table = np.zeros((mu_max + 1, xs.size), dtype=np.float64)
    if sigma > mu_max:
        return table

    radial = xs * xs - 1.0 if domain == "off_cut" else 1.0 - xs * xs
    table[sigma] = _double_factorial_odd(sigma) * np.power(np.maximum(radial, 0.0), 0.5 * sigma)
    if sigma + 1 <= mu_max:
        table[sigma + 1] = (2 * sigma + 1) * xs * table[sigma]
    for mu in range(sigma + 1, mu_max):
        table[mu + 1] = ((2 * mu + 1) * xs * table[mu] - (mu + sigma) * table[mu - 1]) / (mu - sigma + 1)
    return table


def legendre_p(idx: LegendreIndex, x: float, domain: Cut = "off_cut") -> float:
    """Scalar ``P_μ^σ(x)``; see :func:`legendre_p_table` for conventions."""
    return float(legendre_p_table(idx.degree, idx.order, [x], domain)[idx.degree, 0])


# ── Legendre functions of the second kind ───────────────────
@lru_cache(maxsize=256)
def _q_polynomials(mu: int, sigma: int) -> tuple[tuple[Legendre, ...], Legendre]:
    """Derivatives of P_μ (orders 0..σ) and the σ-th derivative of W_{μ−1}."""
    p = Legendre.basis(mu)
    p_derivs = tuple(p.deriv(k) if k else p for k in range(sigma + 1))
    w = Legendre([0.0])
    for k in range(1, mu + 1):
        w = w + Legendre.basis(k - 1) * Legendre.basis(mu - k) / k
    return p_derivs, (w.deriv(sigma) if sigma else w)


def _q_near(mu: int, sigma: int, z: FloatArray) -> FloatArray:
    # Q_μ = ½P_μ ln((z+1)/(z−1)) − W_{μ−1}, differentiated σ times by Leibniz.
    p_derivs, w_deriv = _q_polynomials(mu, sigma)
    log_term = np.log1p(2.0 / (z - 1.0))
    total = np.zeros_like(z)
    for k in range(sigma + 1):
        if k == 0:
            lk = log_term
        else:
            lk = ((-1) ** (k - 1)) * math.factorial(k - 1) * ((z + 1.0) ** (-k) - (z - 1.0) ** (-k))
        total += math.comb(sigma, k) * p_derivs[sigma - k](z) * lk
    value = 0.5 * total - w_deriv(z)
    return value * np.power(z * z - 1.0, 0.5 * sigma)


def _q_far(mu: int, sigma: int, z: FloatArray) -> FloatArray:
    # Hypergeometric tail in 1/z², all terms of one sign.
    log_a0 = mu * math.log(2.0) + 2.0 * log_factorial(mu) - log_factorial(2 * mu + 1)
    log_t0 = (
        log_a0
        + log_factorial(mu + sigma)
        - log_factorial(mu)
        - (mu + 1 + sigma) * np.log(z)
        + 0.5 * sigma * np.log(z * z - 1.0)
    )
    inv_z2 = 1.0 / (z * z)
    term = np.ones_like(z)
    acc = np.ones_like(z)
    for k in range(_Q_SERIES_MAX_TERMS):
        ratio = (mu + 2 * k + sigma + 1) * (mu + 2 * k + sigma + 2) / (2.0 * (k + 1) * (2 * mu + 2 * k + 3))
        term = term * ratio * inv_z2
        acc += term
        if np.all(term <= 1e-17 * acc):
            break
    return ((-1) ** sigma) * np.exp(log_t0) * acc


def legendre_q_values(mu: int, sigma: int, z: npt.ArrayLike) -> FloatArray:
    """Vectorised ``Q_μ^σ(z)`` for z > 1.

    Uses the logarithmic closed form where it is well conditioned and the
    all-positive hypergeometric series in 1/z² once the ratio
    ``(z+√(z²−1))^{2μ+1}`` passes 1e4.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if np.any(zs <= 1.0):
        raise DomainRangeError("legendre_q", "z", float(np.min(zs)))
    if not 0 <= sigma <= mu:
        raise DomainRangeError("legendre_q", "sigma", sigma)

    far = (2 * mu + 1) * np.arccosh(zs) > math.log(_Q_FAR_RATIO)
    out = np.empty_like(zs)
    if np.any(~far):
        out[~far] = _q_near(mu, sigma, zs[~far])
    if np.any(far):
        out[far] = _q_far(mu, sigma, zs[far])
    return out


def legendre_q(idx: LegendreIndex, z: float) -> float:
    """Scalar ``Q_μ^σ(z)``; raises :class:`DomainRangeError` for z ≤ 1."""
    return float(legendre_q_values(idx.degree, idx.order, [z])[0])


# ── Harris coefficients ─────────────────────────────────────
@lru_cache(maxsize=4096)
def harris_coefficients(idx: LegendreIndex) -> HarrisCoefficients:
    """U, V, W, X, Z for (μ, σ) from their closed forms."""
    mu, sigma = idx.degree, idx.order
    ratio = Fraction(math.factorial(mu - sigma), math.factorial(mu + sigma))
    z = (-1) ** sigma * ratio * ratio
    u = z * Fraction((mu - sigma + 1) * (mu - sigma + 2), (2 * mu + 3) ** 2)
    v = -z * Fraction((mu + sigma - 1) * (mu + sigma), (2 * mu - 1) ** 2)
    w = z * Fraction(2 * (2 * mu + 1) * (4 * sigma * sigma - 1), (2 * mu - 1) ** 2 * (2 * mu + 3) ** 2)
    x = -ratio * Fraction(2 * (2 * mu + 1), (2 * mu - 1) * (2 * mu + 3))
    return HarrisCoefficients(U=float(u), V=float(v), W=float(w), X=float(x), Z=float(z))


# ── Weight kernels ──────────────────────────────────────────
def _p_pair(mu: int, sigma: int, z: FloatArray) -> tuple[FloatArray, FloatArray]:
    table = legendre_p_table(mu + 1, sigma, z)
    return table[mu], table[mu + 1]


def omega(kind: Literal["F", "G"], mu: int, sigma: int, z: npt.ArrayLike) -> FloatArray:
    """Antiderivative companions: ``Ω_F = Q/P`` and ``Ω_G = z/P²``.

    ``F = −dΩ_F/dz`` and ``G = −dΩ_G/dz``.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    p = legendre_p_table(mu, sigma, zs)[mu]
    if kind == "F":
        return legendre_q_values(mu, sigma, zs) / p
    if kind == "G":
        return zs / p / p
    raise DomainRangeError("omega", "kind", float("nan"))


def _single_weight(kind: str, mu: int, sigma: int, z: FloatArray) -> FloatArray:
    p, p_next = _p_pair(mu, sigma, z)
    zz = z * z - 1.0
    if kind == "F":
        sign = (-1) ** sigma
        scale = math.exp(log_factorial(mu + sigma) - log_factorial(mu - sigma))
        return sign * scale / zz / p / p
    little = (2 * mu + 3) * z * z - 2.0 * (mu - sigma + 1) * z * p_next / p - 1.0
    if kind == "little_l":
        return little
    if kind == "G":
        return -little / zz / p / p
    raise DomainRangeError("weight_kernels", "kind", float("nan"))


def weight_kernels(
    kind: WeightKind,
    idx: LegendreIndex,
    z: npt.ArrayLike,
    idx2: LegendreIndex | None = None,
) -> FloatArray:
    """Closed-form radial weights.

    ``F``, ``G`` and ``little_l`` take a single index.  The two-index weights
    are the negative derivatives of products of companions:

    * ``F2 = −d/dz[Ω_F(μ)·Ω_F(μ′)]``
    * ``E2 = −d/dz[Ω_G(μ)·Ω_F(μ′)]``
    * ``G2 = −d/dz[Ω_G(μ)·Ω_G(μ′)]``
    """
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if np.any(zs <= 1.0):
        raise DomainRangeError("weight_kernels", "z", float(np.min(zs)))
    mu, sigma = idx.degree, idx.order
    if kind in ("F", "G", "little_l"):
        return _single_weight(kind, mu, sigma, zs)

    if idx2 is None:
        raise DomainRangeError("weight_kernels", "idx2", float("nan"))
    mu2, sigma2 = idx2.degree, idx2.order
    if kind == "F2":
        return _single_weight("F", mu, sigma, zs) * omega("F", mu2, sigma2, zs) + omega(
            "F", mu, sigma, zs
        ) * _single_weight("F", mu2, sigma2, zs)
    if kind == "E2":
        return _single_weight("G", mu, sigma, zs) * omega("F", mu2, sigma2, zs) + omega(
            "G", mu, sigma, zs
        ) * _single_weight("F", mu2, sigma2, zs)
    if kind == "G2":
        return _single_weight("G", mu, sigma, zs) * omega("G", mu2, sigma2, zs) + omega(
            "G", mu, sigma, zs
        ) * _single_weight("G", mu2, sigma2, zs)
    raise DomainRangeError("weight_kernels", "kind", float("nan"))


# ── Clebsch–Gordan brackets ─────────────────────────────────
def _cg_parts(j1: int, j2: int, j: int, m1: int, m2: int) -> tuple[Fraction, Fraction]:
    """CG(j1 j2 j; m1 m2 m1+m2) as (radicand, rational sum): value = √radicand · sum."""
    m = m1 + m2
    f = math.factorial
    radicand = Fraction(
        (2 * j + 1) * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j) * f(j + m) * f(j - m)
        * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2),
        f(j1 + j2 + j + 1),
    )
    k_lo = max(0, j2 - j - m1, j1 - j + m2)
    k_hi = min(j1 + j2 - j, j1 - m1, j2 + m2)
    total = Fraction(0)
    for k in range(k_lo, k_hi + 1):
        denom = f(k) * f(j1 + j2 - j - k) * f(j1 - m1 - k) * f(j2 + m2 - k) * f(j - j2 + m1 + k) * f(j - j1 - m2 + k)
        total += Fraction((-1) ** k, denom)
    return radicand, total


@lru_cache(maxsize=65536)
def _cg_bracket_canonical(j1: int, j2: int, j: int, m1: int, m2: int) -> float:
    m = m1 + m2
    f = math.factorial
    ratio = Fraction(f(j - m) * f(j1 + m1) * f(j2 + m2), f(j + m) * f(j1 - m1) * f(j2 - m2))
    rad_m, sum_m = _cg_parts(j1, j2, j, m1, m2)
    rad_0, sum_0 = _cg_parts(j1, j2, j, 0, 0)
    radicand = ratio * rad_m * rad_0
    signed = sum_m * sum_0
    if signed == 0 or radicand == 0:
        return 0.0
    num_root = math.isqrt(radicand.numerator)
    den_root = math.isqrt(radicand.denominator)
    if num_root * num_root == radicand.numerator and den_root * den_root == radicand.denominator:
        return float(signed * Fraction(num_root, den_root))
    root = math.exp(0.5 * (math.log(radicand.numerator) - math.log(radicand.denominator)))
    return float(signed) * root


def cg_bracket(j1: int, j2: int, j: int, m1: int, m2: int, m: int) -> float:
    """Linearisation bracket ``[j1 j2 j; m1 m2 m]``.

    ``P_{j1}^{m1}·P_{j2}^{m2} = Σ_j [j1 j2 j; m1 m2 m1+m2] P_j^{m1+m2}``
    on the cut.  Evaluated in exact rational arithmetic; the result is
    identical under the swap (j1, m1) ↔ (j2, m2).
    """
    if m != m1 + m2:
        return 0.0
    if min(j1, j2, j) < 0 or abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    if not abs(j1 - j2) <= j <= j1 + j2 or (j1 + j2 + j) % 2:
        return 0.0
    if (j2, m2) < (j1, m1):
        j1, j2, m1, m2 = j2, j1, m2, m1
    return _cg_bracket_canonical(j1, j2, j, m1, m2)


def linearize_product(l: int, m: int, l_prime: int, m_prime: int) -> list[tuple[int, float]]:  # noqa: E741
    """Expand ``P_l^m·P_{l′}^{m′}`` into ``[(j, coefficient), …]`` of ``P_j^{m+m′}``."""
    if not (0 <= m <= l and 0 <= m_prime <= l_prime):
        raise DomainRangeError("linearize_product", "order", max(m - l, m_prime - l_prime))
    order = m + m_prime
    terms: list[tuple[int, float]] = []
    for j in range(abs(l - l_prime), l + l_prime + 1):
        if j < order:
            continue
        c = cg_bracket(l, l_prime, j, m, m_prime, order)
        if c != 0.0:
            terms.append((j, c))
    return terms


# ── Gegenbauer functions ────────────────────────────────────
def gegenbauer_c(idx: GegenbauerIndex, x: npt.ArrayLike) -> FloatArray:
    """``C_n^l(x) = Σ_j (−1)^j Γ(n−j+l)/(Γ(l) j! (n−2j)!) (2x)^{n−2j}``."""
    n, lam = idx.degree, idx.superscript
    xs = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(xs)
    for jj in range(n // 2 + 1):
        coeff = ((-1) ** jj) * special.poch(lam, n - jj) / (math.factorial(jj) * math.factorial(n - 2 * jj))
        total = total + coeff * np.power(2.0 * xs, n - 2 * jj)
    return total


def gegenbauer_log_c(idx: GegenbauerIndex, x: npt.ArrayLike) -> FloatArray:
    """``log C_n^l(x)`` for x > 1, where the polynomial is positive.

    Uses the forward three-term recurrence, which is stable above the
    last zero, renormalising each step so no intermediate overflows.
    """
    n, lam = idx.degree, idx.superscript
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs <= 1.0):
        raise DomainRangeError("gegenbauer_log_c", "x", float(np.min(xs)))
    if n == 0:
        return np.zeros_like(xs)
    prev = np.ones_like(xs)
    cur = 2.0 * lam * xs
    log_scale = np.zeros_like(xs)
    for k in range(2, n + 1):
        prev, cur = cur, (2.0 * xs * (k + lam - 1.0) * cur - (k + 2.0 * lam - 2.0) * prev) / k
        scale = np.abs(cur)
        prev = prev / scale
        cur = cur / scale
        log_scale = log_scale + np.log(scale)
    return log_scale + np.log(cur)


def gegenbauer_log_weight(m: int, u: float, x: npt.ArrayLike) -> FloatArray:
    """``log[(x²−1)^{−u−½} / C_m^u(x)²]``, the derivative of ``D_m^u/C_m^u``."""
    xs = np.asarray(x, dtype=np.float64)
    return -(u + 0.5) * np.log((xs - 1.0) * (xs + 1.0)) - 2.0 * gegenbauer_log_c(GegenbauerIndex(m, u), xs)


@lru_cache(maxsize=8)
def _gauss_legendre(order: int) -> tuple[FloatArray, FloatArray]:
    return np.polynomial.legendre.leggauss(order)


def _graded_panels(delta: float) -> list[tuple[float, float]]:
    edges = [0.0]
    width = delta
    while edges[-1] + width < 1.0:
        edges.append(edges[-1] + width)
        width *= 2.0
    edges.append(1.0)
    return list(zip(edges[:-1], edges[1:], strict=True))


def gegenbauer_tail(m: int, u: float, xi: float, *, order: int = 24) -> float:
    """``∫_ξ^∞ dx/[(x²−1)^{u+½} C_m^u(x)²]``, which equals ``−D_m^u(ξ)/C_m^u(ξ)``.

    The integral is mapped to t ∈ (0, 1] by x = ξ/t and integrated on
    Gauss–Legendre panels graded in s = 1 − t with initial width (ξ−1)/ξ.
    The integrand is evaluated as an exponential of its logarithm, so
    large degrees underflow to zero instead of overflowing.
    """
    if xi <= 1.0:
        raise DomainRangeError("gegenbauer_tail", "xi", xi)
    if u < 1.0:
        raise DomainRangeError("gegenbauer_tail", "u", u)
    nodes, weights = _gauss_legendre(order)
    delta = (xi - 1.0) / xi

    parts = []
    for s_lo, s_hi in _graded_panels(delta):
        half = 0.5 * (s_hi - s_lo)
        t = 1.0 - (s_lo + half * (nodes + 1.0))
        log_f = gegenbauer_log_weight(m, u, xi / t) + math.log(xi) - 2.0 * np.log(t)
        parts.append(half * float(np.dot(weights, np.exp(log_f))))
    return math.fsum(parts)


def gegenbauer_d(m: int, u: float, xi: float, *, order: int = 24) -> float:
    """Second-kind companion ``D_m^u(ξ) = −C_m^u(ξ)∫_ξ^∞ dx/[(x²−1)^{u+½} C_m^u(x)²]``."""
    tail = gegenbauer_tail(m, u, xi, order=order)
    if tail == 0.0:
        return 0.0
    return -math.exp(float(gegenbauer_log_c(GegenbauerIndex(m, u), xi)) + math.log(tail))


def gegenbauer_expansion_coefficient(n: int, l: int, p: float) -> float:  # noqa: E741
    """``d_nl(p)`` of the Gegenbauer expansion of ``r12^{−2p}``.

    ``d_nl(p) = −2^{2l+1}Γ(2p−1)Γ(p+l)²(n−l)!(n+p)(2p+2l−1) / (Γ(p)²Γ(2p+n+l))``
    """
    if not 0 <= l <= n:
        raise DomainRangeError("gegenbauer_expansion_coefficient", "l", l)
    log_mag = (
        (2 * l + 1) * math.log(2.0)
        + special.gammaln(2 * p - 1)
        + 2 * special.gammaln(p + l)
        + log_factorial(n - l)
        + math.log(n + p)
        + math.log(2 * p + 2 * l - 1)
        - 2 * special.gammaln(p)
        - special.gammaln(2 * p + n + l)
    )
    return -math.exp(float(log_mag))
