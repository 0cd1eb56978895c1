"""Kinetic-energy, nuclear-attraction and overlap matrix elements.

All three act on electron 1 of a correlated product

    ⟨Φ_s(1)Φ_t(2)Φ_w(3) r_1k^{l′} | O₁ | r12^l Φ_a(1)Φ_x(2)Φ_y(3)⟩,

with charge distributions e = s·a, f = t·x, g = w·y and k = 3 (or 2 for
the kinetic ``bra_pair=2`` variant).  Every case reduces to integrands
the series engine already handles: H-weighted electrons where a
(ξ₁²−η₁²)⁻¹ cancels the volume factor, and r12 powers shifted by the
Laplacian.  Electrons beyond those the operand touches contribute their
plain charge totals.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import structlog

from pci.core.errors import DomainRangeError, UnsupportedIntegral
from pci.core.models import IntegralKind
from pci.modules.engine import Edge, Electron, Integrand, evaluate_integrand
from pci.modules.integrals import charge_total, three_electron, two_electron
from pci.modules.orbitals import OrbitalParams, attraction_terms, cross_terms, laplacian_terms, multiply
from pci.modules.series import SeriesControls, SeriesResult, combine, product

logger = structlog.get_logger()

_POWERS = (0, 1, 2)


def _check(name: str, l: int, l_prime: int, R: float, count: int, bra_pair: int = 3) -> None:  # noqa: E741, N803
    if l not in _POWERS or l_prime not in _POWERS:
        raise UnsupportedIntegral(f"{name}: (l, l′) = ({l}, {l_prime}) is not one of the supported powers 0, 1, 2")
    if bra_pair not in (2, 3):
        raise UnsupportedIntegral(f"{name}: bra_pair must be 2 or 3, got {bra_pair}")
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainRangeError(name, "R", R)
    needed = max(1, 2 if l else 1, bra_pair if l_prime else 1)
    if count < needed:
        raise UnsupportedIntegral(f"{name}: (l, l′) = ({l}, {l_prime}) needs {needed} electrons, got {count}")


def _edges(l: int, l_prime: int, bra_pair: int = 3) -> tuple[Edge, ...]:  # noqa: E741
    edges = []
    if l:
        edges.append(Edge(0, 1, l))
    if l_prime:
        edges.append(Edge(0, bra_pair - 1, l_prime))
    return tuple(edges)


def _rest(distributions: Sequence[OrbitalParams], start: int, R: float) -> SeriesResult:  # noqa: N803
    out = SeriesResult.exact(1.0)
    for d in distributions[start:]:
        out = product(out, SeriesResult.exact(charge_total(d, R)))
    return out


# ── Overlap ─────────────────────────────────────────────────
def overlap_integrand(distributions: Sequence[OrbitalParams], l: int, l_prime: int) -> Integrand:  # noqa: E741
    """The operand r12^l r13^{l′} over K-weighted electrons."""
    return Integrand(electrons=tuple(Electron(d) for d in distributions), edges=_edges(l, l_prime))


def overlap(
    distributions: Sequence[OrbitalParams],
    l: int,  # noqa: E741
    l_prime: int,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """⟨r12^l r13^{l′}⟩ over the charge distributions e, f, g, ...

    ``l′ = 0`` with l = 1 or 2 is literally ⟨r12⟩ or ⟨r12²⟩ and
    l = l′ = 1 is ⟨r12 r13⟩; further electrons multiply in as totals.
    """
    _check("overlap", l, l_prime, R, len(distributions))
    ds = list(distributions)
    if l == 0 and l_prime == 0:
        return _rest(ds, 0, R)
    if l_prime == 0:
        kind = IntegralKind.R12 if l == 1 else IntegralKind.R12_SQ
        pair = two_electron(kind, ds[0], ds[1], R, ctrl)
        return pair if len(ds) == 2 else product(pair, _rest(ds, 2, R))
    if l == 1 and l_prime == 1:
        triple = three_electron(IntegralKind.R12_R13, ds[0], ds[1], ds[2], R, ctrl)
        return triple if len(ds) == 3 else product(triple, _rest(ds, 3, R))
    return evaluate_integrand(overlap_integrand(ds, l, l_prime), R, ctrl, label="overlap")


def nuclear_repulsion(
    distributions: Sequence[OrbitalParams],
    Z_a: float,  # noqa: N803
    Z_b: float,  # noqa: N803
    l: int,  # noqa: E741
    l_prime: int,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """Z_a Z_b / R times :func:`overlap`."""
    return overlap(distributions, l, l_prime, R, ctrl).scaled(Z_a * Z_b / R)


# ── Nuclear attraction ──────────────────────────────────────
def nuclear_attraction(
    distributions: Sequence[OrbitalParams],
    Z_a: float,  # noqa: N803
    Z_b: float,  # noqa: N803
    l: int,  # noqa: E741
    l_prime: int,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
) -> SeriesResult:
    """−(2/R)⟨[(Z_a+Z_b)ξ₁ + (Z_a−Z_b)η₁]/(ξ₁²−η₁²) · r12^l r13^{l′}⟩.

    For l = l′ = 0 this is ``−½πR² δ(m_e;0)[(Z_a+Z_b)H^0_{1,0,e}(∞) +
    (Z_a−Z_b)H^0_{0,1,e}(∞)]`` times the totals of the other electrons.
    Nucleus a sits where η → +1.
    """
    _check("nuclear_attraction", l, l_prime, R, len(distributions))
    e, *others = distributions
    edges = _edges(l, l_prime)
    integrands = [
        Integrand(
            electrons=(Electron(term.apply(), "H"), *(Electron(o) for o in others)),
            edges=edges,
            coefficient=2.0 / R * term.coefficient,
        )
        for term in attraction_terms(Z_a, Z_b, e)
    ]
    if not integrands:
        return SeriesResult.zero()
    return evaluate_integrand(integrands, R, ctrl, label="nuclear_attraction")


# ── Kinetic energy ──────────────────────────────────────────
def kinetic_integrands(
    bra: Sequence[OrbitalParams],
    ket: Sequence[OrbitalParams],
    l: int,  # noqa: E741
    l_prime: int,
    R: float,  # noqa: N803
    *,
    bra_pair: int = 3,
) -> list[Integrand]:
    """−½∇₁² acting on r12^l Φ_a(1)Φ_x(2)..., expanded into engine integrands.

    ``∇²(r^lΦ) = l(l+1) r^{l−2} Φ + 2l r^{l−2}(r⃗₁−r⃗₂)·∇Φ + r^l ∇²Φ``; the
    last two terms come from :func:`cross_terms` and :func:`laplacian_terms`.
    """
    s, a = bra[0], ket[0]
    dists = [multiply(b, k) for b, k in zip(bra, ket, strict=True)]
    rest = tuple(Electron(d) for d in dists[1:])
    bra_edge = (Edge(0, bra_pair - 1, l_prime),) if l_prime else ()

    out: list[Integrand] = []
    if l:
        out.append(
            Integrand(
                electrons=(Electron(dists[0]), *rest),
                edges=(*bra_edge, Edge(0, 1, l - 2)),
                coefficient=-0.5 * l * (l + 1),
            )
        )
    d_edges = (*bra_edge, Edge(0, 1, l)) if l else bra_edge
    for term in laplacian_terms(a):
        out.append(
            Integrand(
                electrons=(Electron(term.apply(partner=s), "H"), *rest),
                edges=d_edges,
                coefficient=-2.0 / R**2 * term.coefficient,
            )
        )
    if l:
        for pair in cross_terms(a):
            e, f = pair.apply(dists[0], dists[1])
            out.append(
                Integrand(
                    electrons=(Electron(e, "K" if pair.k_weighted else "H"), Electron(f), *rest[1:]),
                    edges=(*bra_edge, Edge(0, 1, l - 2)),
                    coefficient=-l * pair.coefficient,
                )
            )
    return out


def _closed_pair_integrands(bra: Sequence[OrbitalParams], ket: Sequence[OrbitalParams], R: float) -> list[Integrand]:  # noqa: N803
    """−¼∫Φ_f r12² [D_a+D_s]Φ_e / ((R/2)²(ξ₁²−η₁²)) as engine integrands."""
    s, a = bra[0], ket[0]
    rest = tuple(Electron(multiply(b, k)) for b, k in zip(bra[1:], ket[1:], strict=True))
    out = []
    for base, partner in ((a, s), (s, a)):
        for term in laplacian_terms(base):
            out.append(
                Integrand(
                    electrons=(Electron(term.apply(partner=partner), "H"), *rest),
                    edges=(Edge(0, 1, 2),),
                    coefficient=-term.coefficient / R**2,
                )
            )
    return out


def kinetic_energy(
    bra: Sequence[OrbitalParams],
    ket: Sequence[OrbitalParams],
    l: int,  # noqa: E741
    l_prime: int,
    R: float,  # noqa: N803
    ctrl: SeriesControls,
    *,
    bra_pair: int = 3,
    closed_form: bool = False,
) -> SeriesResult:
    """⟨Φ_s Φ_t Φ_w r_{1k}^{l′} | −½∇₁² | r12^l Φ_a Φ_x Φ_y⟩ with k = *bra_pair*.

    With *closed_form* (only ``bra_pair=2``, l = l′ = 1) the symmetric
    reduction ``½·S_e·S_f − ¼∫Φ_f r12²[D_a+D_s]Φ_e/((R/2)²(ξ₁²−η₁²))``
    is used; it must agree with the general expansion.

    Raises
    ------
    UnsupportedIntegral
        For powers outside {0, 1, 2}, too few electrons, mismatched bra
        and ket lengths, or *closed_form* outside its one case.
    """
    if len(bra) != len(ket) or not bra:
        raise UnsupportedIntegral(f"kinetic_energy: bra has {len(bra)} orbitals, ket has {len(ket)}")
    _check("kinetic_energy", l, l_prime, R, len(bra), bra_pair)
    if closed_form:
        if not (bra_pair == 2 and l == 1 and l_prime == 1):
            raise UnsupportedIntegral("kinetic_energy: the closed reduction covers bra_pair=2, l=l′=1 only")
        dists = [multiply(b, k) for b, k in zip(bra, ket, strict=True)]
        overlap_term = SeriesResult.exact(0.5 * math.prod(charge_total(d, R) for d in dists))
        rest = evaluate_integrand(_closed_pair_integrands(bra, ket, R), R, ctrl, label="kinetic_closed")
        return combine([(1.0, overlap_term), (1.0, rest)])

    integrands = kinetic_integrands(bra, ket, l, l_prime, R, bra_pair=bra_pair)
    logger.debug("kinetic_expanded", terms=len(integrands), l=l, l_prime=l_prime, bra_pair=bra_pair)
    return evaluate_integrand(integrands, R, ctrl, label="kinetic")
