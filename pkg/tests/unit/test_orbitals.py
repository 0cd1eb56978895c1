"""Tests for pci.modules.orbitals — septuples, shifts, evaluation and symbolic operators."""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pci.core.errors import DomainRangeError, InvalidOrbital, ShiftError
from pci.modules.oracle import oracle_pointwise_laplacian
from pci.modules.orbitals import (
    OrbitalParams,
    RationalFactor,
    attraction_terms,
    cartesian,
    conjugate,
    cross_terms,
    evaluate,
    evaluate_many,
    laplacian_terms,
    multiply,
    shift,
    spheroidal,
)

S = OrbitalParams(alpha=1.0)

# Orbitals used by the pointwise operator checks.
SAMPLE_ORBITALS = [
    OrbitalParams(alpha=1.0),
    OrbitalParams(p=1, alpha=1.3),
    OrbitalParams(p=2, q=1, alpha=0.8, beta=0.4),
    OrbitalParams(q=2, alpha=1.1, beta=-0.3),
    OrbitalParams(gamma=1, nu=1, alpha=1.2, m=1),
    OrbitalParams(gamma=1, nu=1, alpha=0.9, beta=0.2, m=-1),
    OrbitalParams(p=1, gamma=2, nu=2, alpha=1.5, m=2),
    OrbitalParams(gamma=2, alpha=0.7, beta=0.5),
    OrbitalParams(p=3, q=3, nu=2, alpha=2.0, beta=1.0),
    OrbitalParams(q=1, gamma=1, nu=3, alpha=1.0, beta=-0.6, m=1),
]


def _points(count: int, seed: int) -> list[tuple[float, float, float]]:
    rng = np.random.default_rng(seed)
    xi = rng.uniform(1.2, 3.0, count)
    eta = rng.uniform(0.15, 0.8, count) * rng.choice([-1.0, 1.0], count)
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    return [(float(x), float(e), float(p)) for x, e, p in zip(xi, eta, phi, strict=True)]


# ── Septuples ───────────────────────────────────────────────
class TestOrbitalParams:
    def test_invalid_alpha(self) -> None:
        with pytest.raises(InvalidOrbital, match="alpha"):
            OrbitalParams(alpha=0.0)
        with pytest.raises(InvalidOrbital, match="alpha"):
            OrbitalParams(alpha=float("inf"))

    def test_negative_power(self) -> None:
        with pytest.raises(InvalidOrbital, match="gamma"):
            OrbitalParams(gamma=-1, alpha=1.0)

    def test_as_tuple(self) -> None:
        assert OrbitalParams(1, 2, 3, 4, 0.5, -0.5, 1).as_tuple() == (1, 2, 3, 4, 0.5, -0.5, 1)


class TestMultiply:
    def test_index_addition(self) -> None:
        assert multiply(S, OrbitalParams(p=1, alpha=1.0)) == OrbitalParams(p=1, alpha=2.0)

    def test_m_cancels(self) -> None:
        a = OrbitalParams(gamma=1, nu=1, alpha=1.0, m=1)
        assert multiply(a, conjugate(a)).m == 0

    def test_commutative_and_associative(self) -> None:
        a, b, c = SAMPLE_ORBITALS[2], SAMPLE_ORBITALS[4], SAMPLE_ORBITALS[9]
        assert multiply(a, b) == multiply(b, a)
        assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))

    def test_pointwise_product(self) -> None:
        a, b = SAMPLE_ORBITALS[4], SAMPLE_ORBITALS[8]
        ab = multiply(a, b)
        for pt in _points(100, 7):
            expected = evaluate(a, *pt) * evaluate(b, *pt)
            assert abs(evaluate(ab, *pt) - expected) <= 1e-13 * abs(expected)


class TestShift:
    def test_raising_shift(self) -> None:
        assert shift(S, p=2) == OrbitalParams(p=2, alpha=1.0)

    def test_lowering_pair(self) -> None:
        e = OrbitalParams(gamma=1, nu=1, alpha=1.0, m=1)
        assert shift(e, gamma=1, nu=1, m=-1) == OrbitalParams(gamma=2, nu=2, alpha=1.0, m=0)

    def test_zero_shift_identity(self) -> None:
        assert shift(SAMPLE_ORBITALS[3]) == SAMPLE_ORBITALS[3]

    def test_negative_result(self) -> None:
        with pytest.raises(ShiftError, match="q"):
            shift(S, q=-1)


# ── Evaluation and coordinates ──────────────────────────────
class TestEvaluate:
    def test_unit_septuple(self) -> None:
        assert evaluate(S, 1.0, 0.0, 0.0) == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_direct_formula(self) -> None:
        a = OrbitalParams(1, 1, 1, 1, 2.0, 0.5, 1)
        xi, eta, phi = 2.0, 0.5, 0.3
        expected = (
            xi * eta * math.sqrt(xi * xi - 1) * math.sqrt(1 - eta * eta) * math.exp(-2.0 * xi + 0.5 * eta)
        ) * cmath.exp(0.3j)
        assert abs(evaluate(a, xi, eta, phi) - expected) <= 1e-14 * abs(expected)

    def test_periodic_phase(self) -> None:
        a = OrbitalParams(gamma=2, nu=2, alpha=1.0, m=2)
        assert evaluate(a, 1.5, 0.3, math.pi) == pytest.approx(evaluate(a, 1.5, 0.3, 0.0), rel=1e-14)

    def test_domain(self) -> None:
        with pytest.raises(DomainRangeError):
            evaluate(S, 0.9, 0.0, 0.0)
        with pytest.raises(DomainRangeError):
            evaluate(S, 1.5, 1.1, 0.0)

    def test_vectorised_matches_scalar(self) -> None:
        pts = _points(20, 3)
        xi, eta, phi = (np.array(v) for v in zip(*pts, strict=True))
        a = SAMPLE_ORBITALS[9]
        expected = np.array([evaluate(a, *pt) for pt in pts])
        assert_allclose(evaluate_many(a, xi, eta, phi), expected, rtol=1e-14)

    def test_cartesian_round_trip(self) -> None:
        pts = _points(50, 11)
        xi, eta, phi = (np.array(v) for v in zip(*pts, strict=True))
        R = 1.4
        back = spheroidal(cartesian(xi, eta, phi, R), R)
        assert_allclose(back[0], xi, rtol=1e-12)
        assert_allclose(back[1], eta, rtol=1e-10, atol=1e-12)
        assert_allclose(np.cos(back[2]), np.cos(phi), atol=1e-12)

    def test_nucleus_a_on_positive_axis(self) -> None:
        R = 2.0
        p = cartesian(np.array([1.0]), np.array([1.0]), np.array([0.0]), R)[0]
        assert_allclose(p, [0.0, 0.0, 0.5 * R], atol=1e-15)


# ── Laplacian ───────────────────────────────────────────────
def _symbolic_d(a: OrbitalParams, point: tuple[float, float, float], *, merge: bool = True) -> float:
    total = sum(t.evaluate(*point) for t in laplacian_terms(a, merge_azimuthal=merge))
    return float((total / evaluate(a, *point)).real)


class TestLaplacianTerms:
    def test_plain_exponential(self) -> None:
        al = 1.7
        terms = laplacian_terms(OrbitalParams(alpha=al))
        summary = sorted((t.base.p, t.coefficient, t.flags) for t in terms)
        assert summary == [(0, -al * al, ()), (1, -2.0 * al, ()), (2, al * al, ())]

    def test_p_one_drops_inverse_square(self) -> None:
        terms = laplacian_terms(OrbitalParams(p=1, alpha=1.0))
        assert all(RationalFactor.XI_INV2 not in t.flags for t in terms)

    def test_no_rational_flags_when_powers_match_m(self) -> None:
        a = OrbitalParams(gamma=1, nu=1, alpha=1.0, m=1)
        flags = {f for t in laplacian_terms(a) for f in t.flags}
        assert RationalFactor.XI_SQ_M1_INV not in flags
        assert RationalFactor.ONE_M_ETA_SQ_INV not in flags

    @pytest.mark.parametrize("a", SAMPLE_ORBITALS)
    def test_matches_finite_difference(self, a: OrbitalParams) -> None:
        for pt in _points(20, 101):
            expected = oracle_pointwise_laplacian(a, pt)
            assert _symbolic_d(a, pt) == pytest.approx(expected, rel=1e-4, abs=1e-4)

    @pytest.mark.parametrize("a", SAMPLE_ORBITALS[4:7])
    def test_merged_and_split_azimuthal_agree(self, a: OrbitalParams) -> None:
        for pt in _points(5, 5):
            assert _symbolic_d(a, pt, merge=False) == pytest.approx(_symbolic_d(a, pt), rel=1e-12, abs=1e-12)


# ── Cross term ──────────────────────────────────────────────
def _phi_cartesian(a: OrbitalParams, point: np.ndarray, R: float) -> complex:  # noqa: N803
    xi, eta, phi = spheroidal(point[None, :], R)
    return complex(evaluate_many(a, xi, eta, phi)[0])


def _cross_fd(a: OrbitalParams, p1: tuple[float, float, float], p2: tuple[float, float, float], R: float) -> complex:  # noqa: N803
    c1 = cartesian(*(np.array([v]) for v in p1), R)[0]
    c2 = cartesian(*(np.array([v]) for v in p2), R)[0]
    h = 1e-5 * R
    grad = np.zeros(3, dtype=np.complex128)
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        grad[axis] = (_phi_cartesian(a, c1 + step, R) - _phi_cartesian(a, c1 - step, R)) / (2 * h)
    xi1, eta1, _ = p1
    return complex((xi1 * xi1 - eta1 * eta1) * np.dot(c1 - c2, grad) / evaluate(a, *p1))


class TestCrossTerms:
    @pytest.mark.parametrize("a", SAMPLE_ORBITALS)
    def test_matches_cartesian_gradient(self, a: OrbitalParams) -> None:
        R = 2.0
        pts = _points(20, 202)
        for p1, p2 in zip(pts[:10], pts[10:], strict=True):
            symbolic = sum(t.evaluate(p1, p2) for t in cross_terms(a))
            expected = _cross_fd(a, p1, p2, R)
            assert abs(symbolic - expected) <= 1e-6 * max(abs(expected), 1.0)

    def test_azimuthal_pair_only_for_nonzero_m(self) -> None:
        assert not any(t.k_weighted for t in cross_terms(OrbitalParams(gamma=1, nu=1, alpha=1.0)))
        assert sum(t.k_weighted for t in cross_terms(OrbitalParams(gamma=1, nu=1, alpha=1.0, m=1))) == 2


# ── Nuclear attraction operand ──────────────────────────────
class TestAttractionTerms:
    def test_homonuclear_drops_difference_term(self) -> None:
        terms = attraction_terms(1.0, 1.0, S)
        assert len(terms) == 1
        assert terms[0].coefficient == -2.0
        assert terms[0].h_weighted
        assert terms[0].apply() == OrbitalParams(p=1, alpha=1.0)

    def test_pointwise_value(self) -> None:
        Z_a, Z_b = 2.0, 1.0  # noqa: N806
        for xi, eta, phi in _points(10, 9):
            total = sum(t.evaluate(xi, eta, phi) for t in attraction_terms(Z_a, Z_b, S))
            expected = -((Z_a + Z_b) * xi + (Z_a - Z_b) * eta) / (xi * xi - eta * eta) * evaluate(S, xi, eta, phi)
            assert abs(total - expected) <= 1e-14 * abs(expected)
