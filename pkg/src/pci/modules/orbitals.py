"""Prolate-spheroidal basis functions and their symbolic manipulation.

A basis function (one "septuple") is::

    Φ_s(ξ, η, φ) = ξ^p η^q (ξ²−1)^{γ/2} (1−η²)^{ν/2} e^{−αξ} e^{βη} e^{imφ}

with ξ = (r_a + r_b)/R ≥ 1, η ∈ [−1, 1] and φ the azimuth about the
internuclear axis.  Products of basis functions are basis functions, so
every charge distribution the integral engine sees is again an
:class:`OrbitalParams`.

The kinetic-energy expansion needs the action of the Laplacian written
as a list of index-shifted copies of the same septuple
(:func:`laplacian_terms`) and the two-electron cross term produced by
∇r12^l·∇Φ (:func:`cross_terms`).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from pci.core.errors import DomainRangeError, InvalidOrbital, ShiftError


# ── Septuples ───────────────────────────────────────────────
@dataclass(frozen=True, order=True)
class OrbitalParams:
    """Septuple (p, q, γ, ν, α, β, m) of one basis function or charge distribution."""

    p: int = 0
    q: int = 0
    gamma: int = 0
    nu: int = 0
    alpha: float = 1.0
    beta: float = 0.0
    m: int = 0

    def __post_init__(self) -> None:
        for name in ("p", "q", "gamma", "nu"):
            value = getattr(self, name)
            if value < 0:
                raise InvalidOrbital(f"{name}={value} must be >= 0")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise InvalidOrbital(f"alpha={self.alpha} must be a finite positive number")
        if not math.isfinite(self.beta):
            raise InvalidOrbital(f"beta={self.beta} must be finite")

    def as_tuple(self) -> tuple[int, int, int, int, float, float, int]:
        return (self.p, self.q, self.gamma, self.nu, self.alpha, self.beta, self.m)


@dataclass(frozen=True)
class Shift:
    """Integer offsets on (p, q, γ, ν, m)."""

    p: int = 0
    q: int = 0
    gamma: int = 0
    nu: int = 0
    m: int = 0

    def apply(self, a: OrbitalParams) -> OrbitalParams:
        return shift(a, p=self.p, q=self.q, gamma=self.gamma, nu=self.nu, m=self.m)

    def factor(self, xi: float, eta: float, phi: float) -> complex:
        """Pointwise value of the monomial this shift multiplies by."""
        return (
            xi**self.p
            * eta**self.q
            * (xi * xi - 1.0) ** (0.5 * self.gamma)
            * (1.0 - eta * eta) ** (0.5 * self.nu)
            * cmath.exp(1j * self.m * phi)
        )


def multiply(a: OrbitalParams, b: OrbitalParams) -> OrbitalParams:
    """Pointwise product Φ_a·Φ_b as a single septuple."""
    return OrbitalParams(
        p=a.p + b.p,
        q=a.q + b.q,
        gamma=a.gamma + b.gamma,
        nu=a.nu + b.nu,
        alpha=a.alpha + b.alpha,
        beta=a.beta + b.beta,
        m=a.m + b.m,
    )


def shift(a: OrbitalParams, *, p: int = 0, q: int = 0, gamma: int = 0, nu: int = 0, m: int = 0) -> OrbitalParams:
    """Return *a* with integer offsets applied.

    Raises
    ------
    ShiftError
        If any of p, q, γ, ν would become negative.
    """
    for name, base, delta in (("p", a.p, p), ("q", a.q, q), ("gamma", a.gamma, gamma), ("nu", a.nu, nu)):
        if base + delta < 0:
            raise ShiftError(name, base + delta)
    return replace(a, p=a.p + p, q=a.q + q, gamma=a.gamma + gamma, nu=a.nu + nu, m=a.m + m)


def conjugate(a: OrbitalParams) -> OrbitalParams:
    """Complex conjugate (m → −m); bras are passed through this by the caller."""
    return replace(a, m=-a.m)


# ── Coordinates ─────────────────────────────────────────────
def _check_point(xi: float, eta: float) -> None:
    if xi < 1.0:
        raise DomainRangeError("evaluate", "xi", xi)
    if abs(eta) > 1.0:
        raise DomainRangeError("evaluate", "eta", eta)


def evaluate(a: OrbitalParams, xi: float, eta: float, phi: float) -> complex:
    """Φ_a(ξ, η, φ)."""
    _check_point(xi, eta)
    radial = xi**a.p * (xi * xi - 1.0) ** (0.5 * a.gamma) * math.exp(-a.alpha * xi)
    angular = eta**a.q * (1.0 - eta * eta) ** (0.5 * a.nu) * math.exp(a.beta * eta)
    return radial * angular * cmath.exp(1j * a.m * phi)


def evaluate_many(a: OrbitalParams, xi: np.ndarray, eta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Vectorised :func:`evaluate` without domain checks (for samplers)."""
    radial = xi**a.p * np.power(np.maximum(xi * xi - 1.0, 0.0), 0.5 * a.gamma) * np.exp(-a.alpha * xi)
    angular = eta**a.q * np.power(np.maximum(1.0 - eta * eta, 0.0), 0.5 * a.nu) * np.exp(a.beta * eta)
    return radial * angular * np.exp(1j * a.m * phi)


def cartesian(xi: np.ndarray, eta: np.ndarray, phi: np.ndarray, R: float) -> np.ndarray:
    """Cartesian coordinates, nuclei on the z axis at ±R/2; shape ``(..., 3)``."""
    rho = 0.5 * R * np.sqrt(np.maximum(xi * xi - 1.0, 0.0) * np.maximum(1.0 - eta * eta, 0.0))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), 0.5 * R * xi * eta], axis=-1)


def spheroidal(points: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`cartesian`: (ξ, η, φ) for points of shape ``(..., 3)``."""
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    rho2 = x * x + y * y
    r_plus = np.sqrt(rho2 + (z - 0.5 * R) ** 2)
    r_minus = np.sqrt(rho2 + (z + 0.5 * R) ** 2)
    xi = np.maximum((r_plus + r_minus) / R, 1.0)
    eta = np.clip((r_minus - r_plus) / R, -1.0, 1.0)
    return xi, eta, np.arctan2(y, x)


# ── Rational factors ────────────────────────────────────────
class RationalFactor(str, Enum):
    XI_INV = "xi^-1"
    XI_INV2 = "xi^-2"
    ETA_INV = "eta^-1"
    ETA_INV2 = "eta^-2"
    XI_SQ_M1_INV = "(xi^2-1)^-1"
    ONE_M_ETA_SQ_INV = "(1-eta^2)^-1"
    XI_ETA_INV = "(xi^2-eta^2)^-1"

    def at(self, xi: float, eta: float) -> float:
        return {
            RationalFactor.XI_INV: 1.0 / xi,
            RationalFactor.XI_INV2: 1.0 / (xi * xi),
            RationalFactor.ETA_INV: 1.0 / eta if eta else math.inf,
            RationalFactor.ETA_INV2: 1.0 / (eta * eta) if eta else math.inf,
            RationalFactor.XI_SQ_M1_INV: 1.0 / (xi * xi - 1.0),
            RationalFactor.ONE_M_ETA_SQ_INV: 1.0 / (1.0 - eta * eta),
            RationalFactor.XI_ETA_INV: 1.0 / (xi * xi - eta * eta),
        }[self]


_FLAG_SHIFTS: dict[RationalFactor, Shift] = {
    RationalFactor.XI_INV: Shift(p=-1),
    RationalFactor.XI_INV2: Shift(p=-2),
    RationalFactor.ETA_INV: Shift(q=-1),
    RationalFactor.ETA_INV2: Shift(q=-2),
    RationalFactor.XI_SQ_M1_INV: Shift(gamma=-2),
    RationalFactor.ONE_M_ETA_SQ_INV: Shift(nu=-2),
}


@dataclass(frozen=True)
class OrbitalTerm:
    """``coefficient · Φ_base · Π flags`` on one electron.

    ``(ξ²−η²)⁻¹`` has no index home; it marks the term as H-weighted
    (the volume element's ξ²−η² is cancelled) and is never resolved.
    """

    base: OrbitalParams
    coefficient: float
    flags: tuple[RationalFactor, ...] = field(default_factory=tuple)

    @property
    def h_weighted(self) -> bool:
        return RationalFactor.XI_ETA_INV in self.flags

    def apply(self, partner: OrbitalParams | None = None) -> OrbitalParams:
        """Fold the flags into index shifts, optionally after multiplying by *partner*."""
        out = self.base if partner is None else multiply(partner, self.base)
        for flag in self.flags:
            if flag is RationalFactor.XI_ETA_INV:
                continue
            out = _FLAG_SHIFTS[flag].apply(out)
        return out

    def evaluate(self, xi: float, eta: float, phi: float = 0.0) -> complex:
        value = self.coefficient * evaluate(self.base, xi, eta, phi)
        for flag in self.flags:
            value *= flag.at(xi, eta)
        return value


@dataclass(frozen=True)
class PairTerm:
    """One term of the two-electron cross operator.

    ``coefficient`` times the monomials of ``first`` on electron 1 and
    ``second`` on electron 2.  ``k_weighted`` terms keep the ξ₁²−η₁²
    factor on electron 1; the others cancel it (H weighting).
    """

    coefficient: float
    first: Shift
    second: Shift
    k_weighted: bool = False

    def apply(self, e: OrbitalParams, f: OrbitalParams) -> tuple[OrbitalParams, OrbitalParams]:
        return self.first.apply(e), self.second.apply(f)

    def evaluate(self, point1: tuple[float, float, float], point2: tuple[float, float, float]) -> complex:
        """Factor this term contributes at (ξ₁, η₁, φ₁), (ξ₂, η₂, φ₂)."""
        xi1, eta1, _ = point1
        value = self.coefficient * self.first.factor(*point1) * self.second.factor(*point2)
        return value * (xi1 * xi1 - eta1 * eta1) if self.k_weighted else value


# ── Laplacian ───────────────────────────────────────────────
def _term(a: OrbitalParams, coefficient: float, *flags: RationalFactor, **offsets: int) -> OrbitalTerm:
    return OrbitalTerm(base=shift(a, **offsets), coefficient=coefficient, flags=tuple(flags))


def laplacian_terms(a: OrbitalParams, *, merge_azimuthal: bool = True) -> list[OrbitalTerm]:
    """Symbolic ``(R/2)²(ξ²−η²)∇²Φ_a`` as a term list.

    With *merge_azimuthal* the φ-derivative terms are folded into the
    γ² and ν² terms::

        γ²ξ²/(ξ²−1) − m²/(ξ²−1) = γ² + (γ²−m²)/(ξ²−1)
        ν²η²/(1−η²) − m²/(1−η²) = −ν² + (ν²−m²)/(1−η²)

    which leaves no (ξ²−1)⁻¹ or (1−η²)⁻¹ factor when γ = ν = |m|.
    Zero-coefficient terms are dropped.
    """
    p, q, g, n, al, be, m = a.p, a.q, a.gamma, a.nu, a.alpha, a.beta, a.m
    constant = p * p + p + 2 * p * g + g - al * al - q * q - q - 2 * q * n - n + be * be
    xi_sq_inv = RationalFactor.XI_SQ_M1_INV
    eta_sq_inv = RationalFactor.ONE_M_ETA_SQ_INV

    raw: list[tuple[float, tuple[RationalFactor, ...], dict[str, int]]] = [
        (-2.0 * al * (p + g + 1), (), {"p": 1}),
        (-2.0 * be * (q + n + 1), (), {"q": 1}),
        (float(p - p * p), (RationalFactor.XI_INV2,), {}),
        (float(q * q - q), (RationalFactor.ETA_INV2,), {}),
        (2.0 * al * p, (RationalFactor.XI_INV,), {}),
        (2.0 * be * q, (RationalFactor.ETA_INV,), {}),
        (al * al, (), {"p": 2}),
        (-be * be, (), {"q": 2}),
    ]
    if merge_azimuthal:
        constant += g * g - n * n
        raw += [
            (float(g * g - m * m), (xi_sq_inv,), {}),
            (float(n * n - m * m), (eta_sq_inv,), {}),
        ]
    else:
        raw += [
            (float(g * g), (xi_sq_inv,), {"p": 2}),
            (float(n * n), (eta_sq_inv,), {"q": 2}),
            (float(-m * m), (xi_sq_inv,), {}),
            (float(-m * m), (eta_sq_inv,), {}),
        ]
    terms = [OrbitalTerm(base=a, coefficient=float(constant))] if constant else []
    terms += [_term(a, c, *flags, **offsets) for c, flags, offsets in raw if c != 0.0]
    return terms


def cross_terms(a: OrbitalParams) -> list[PairTerm]:
    """``(ξ₁²−η₁²)(r⃗₁−r⃗₂)·∇₁Φ_a/Φ_a`` as a list of :class:`PairTerm`.

    The φ part is ``(m/2)(ξ₁²−η₁²)[(ξ₂²−1)(1−η₂²)/((ξ₁²−1)(1−η₁²))]^{1/2}
    (e^{i(φ₁−φ₂)} − e^{−i(φ₁−φ₂)})``.
    """
    p, q, g, n, al, be, m = a.p, a.q, a.gamma, a.nu, a.alpha, a.beta, a.m
    none = Shift()
    xy2 = Shift(p=1, q=1)
    raw: list[PairTerm] = [
        # r⃗₁·∇₁
        PairTerm(float(q), Shift(nu=2), none),
        PairTerm(be, Shift(q=1, nu=2), none),
        PairTerm(float(p), Shift(gamma=2), none),
        PairTerm(-al, Shift(p=1, gamma=2), none),
        PairTerm(float(-n), Shift(q=2), none),
        PairTerm(float(g), Shift(p=2), none),
        # z-component of r⃗₂
        PairTerm(float(-q), Shift(p=1, q=-1, nu=2), xy2),
        PairTerm(-be, Shift(p=1, nu=2), xy2),
        PairTerm(float(-p), Shift(p=-1, q=1, gamma=2), xy2),
        PairTerm(al, Shift(q=1, gamma=2), xy2),
        PairTerm(float(n - g), Shift(p=1, q=1), xy2),
    ]
    # ρ-component of r⃗₂: cos(φ₁−φ₂) = (e^{iΔ} + e^{−iΔ})/2
    for dm in (1, -1):
        other = Shift(gamma=1, nu=1, m=-dm)
        raw += [
            PairTerm(0.5 * al, Shift(p=1, gamma=1, nu=1, m=dm), other),
            PairTerm(0.5 * be, Shift(q=1, gamma=1, nu=1, m=dm), other),
            PairTerm(0.5 * (q - p), Shift(gamma=1, nu=1, m=dm), other),
            PairTerm(-0.5 * n, Shift(q=2, gamma=1, nu=-1, m=dm), other),
            PairTerm(-0.5 * g, Shift(p=2, gamma=-1, nu=1, m=dm), other),
        ]
    # φ-component of r⃗₂
    if m:
        for dm in (1, -1):
            raw.append(
                PairTerm(0.5 * m * dm, Shift(gamma=-1, nu=-1, m=dm), Shift(gamma=1, nu=1, m=-dm), k_weighted=True)
            )
    return [t for t in raw if t.coefficient != 0.0]


def attraction_terms(Z_a: float, Z_b: float, a: OrbitalParams) -> list[OrbitalTerm]:  # noqa: N803
    """Nuclear attraction ``−[(Z_a+Z_b)ξ + (Z_a−Z_b)η]/(ξ²−η²)`` acting on *a*.

    The overall 2/R is applied by the caller.  Nucleus a sits at
    z = +R/2, where η → +1.
    """
    flag = RationalFactor.XI_ETA_INV
    terms = [
        _term(a, -(Z_a + Z_b), flag, p=1),
        _term(a, -(Z_a - Z_b), flag, q=1),
    ]
    return [t for t in terms if t.coefficient != 0.0]
