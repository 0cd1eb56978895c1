"""Tests for pci.modules.oracle — verdicts, Monte Carlo determinism and tensor rules."""

from __future__ import annotations

import math

import pytest

from pci.core.errors import OracleUsageError
from pci.core.models import IntegralKind, Verdict
from pci.modules.engine import Edge, Electron, Integrand
from pci.modules.integrals import charge_total, four_electron, integrand_for, three_electron, two_electron
from pci.modules.one_body import kinetic_energy
from pci.modules.oracle import (
    MIN_MANY_ELECTRON_SAMPLES,
    OracleEstimate,
    monte_carlo,
    oracle_kinetic,
    oracle_many_electron,
    oracle_one_electron,
    oracle_two_electron,
)
from pci.modules.orbitals import OrbitalParams
from pci.modules.series import SeriesControls

S = OrbitalParams(alpha=1.0)
S2 = OrbitalParams(alpha=2.0)
SB = OrbitalParams(alpha=1.5, beta=0.25)
PM = OrbitalParams(gamma=1, nu=1, alpha=1.2, m=1)
PMC = OrbitalParams(gamma=1, nu=1, alpha=1.2, m=-1)
CTRL = SeriesControls()


class TestVerdict:
    def test_deterministic_uses_relative_tolerance(self) -> None:
        est = OracleEstimate(value=1.0)
        assert est.verdict(1.0 + 5e-7) is Verdict.PASS
        assert est.verdict(1.0 + 5e-6) is Verdict.FAIL
        assert est.verdict(1.0 + 5e-6, rel_tol=1e-5) is Verdict.PASS

    def test_monte_carlo_uses_standard_error(self) -> None:
        est = OracleEstimate(value=10.0, standard_error=0.1, evaluations=1000, seed=1)
        assert est.verdict(10.29) is Verdict.PASS
        assert est.verdict(10.31) is Verdict.FAIL
        assert est.verdict(10.45, sigmas=5.0) is Verdict.PASS


class TestMonteCarlo:
    def test_same_seed_same_estimate(self) -> None:
        integrand = Integrand(electrons=(Electron(S),))
        first = monte_carlo(integrand, 2.0, 50_000, seed=7)
        second = monte_carlo(integrand, 2.0, 50_000, seed=7)
        assert first == second
        assert monte_carlo(integrand, 2.0, 50_000, seed=8).value != first.value

    def test_thread_count_does_not_change_estimate(self) -> None:
        integrand = integrand_for(IntegralKind.INV_R12, (S, SB))
        serial = monte_carlo(integrand, 1.4, 200_000, seed=3, threads=1)
        parallel = monte_carlo(integrand, 1.4, 200_000, seed=3, threads=4)
        assert serial == parallel

    def test_charge_total_within_error(self) -> None:
        R = 2.0
        est = monte_carlo(Integrand(electrons=(Electron(SB),)), R, 200_000, seed=11)
        assert est.evaluations == 200_000
        assert est.seed == 11
        assert est.standard_error > 0.0
        assert abs(est.value - charge_total(SB, R)) <= 3.0 * est.standard_error

    def test_needs_samples(self) -> None:
        with pytest.raises(OracleUsageError):
            monte_carlo(Integrand(electrons=(Electron(S),)), 2.0, 0, seed=1)

    def test_coalescence_rejected_not_infinite(self) -> None:
        integrand = Integrand(electrons=(Electron(S), Electron(S)), edges=(Edge(0, 1, -1),))
        est = monte_carlo(integrand, 1.4, 10_000, seed=5)
        assert math.isfinite(est.value)
        assert est.rejected >= 0


class TestManyElectronOracle:
    def test_rejects_two_electron_kind(self) -> None:
        with pytest.raises(OracleUsageError, match="three- or four-electron"):
            oracle_many_electron(IntegralKind.INV_R12, (S, S), 1.4, MIN_MANY_ELECTRON_SAMPLES, seed=1)

    def test_enforces_minimum_samples(self) -> None:
        with pytest.raises(OracleUsageError, match="samples"):
            oracle_many_electron(IntegralKind.R12_R13, (S, S, S), 1.4, 1000, seed=1)


class TestTensorRules:
    def test_two_electron_rejects_other_kinds(self) -> None:
        with pytest.raises(OracleUsageError):
            oracle_two_electron(IntegralKind.R12_R13, S, S, 1.4)

    def test_two_electron_rule_order(self) -> None:
        with pytest.raises(OracleUsageError, match="order"):
            oracle_two_electron(IntegralKind.R12_SQ, S, S, 1.4, order=1)

    def test_two_electron_azimuthal_zero(self) -> None:
        assert oracle_two_electron(IntegralKind.R12_SQ, PM, S, 1.4).value == 0.0

    def test_two_electron_is_deterministic(self) -> None:
        est = oracle_two_electron(IntegralKind.R12_SQ, S, SB, 1.4, order=12)
        assert est.standard_error == 0.0
        assert est.evaluations == 12**5

    @pytest.mark.parametrize("e", [S, SB, OrbitalParams(p=2, q=1, alpha=0.8, beta=0.4)])
    def test_one_electron_overlap_is_charge_total(self, e: OrbitalParams) -> None:
        est = oracle_one_electron(e, "overlap", 1.7)
        assert est.value == pytest.approx(charge_total(e, 1.7), rel=1e-12)

    def test_one_electron_rejects_operator(self) -> None:
        with pytest.raises(OracleUsageError, match="operator"):
            oracle_one_electron(S, "kinetic", 1.4)  # type: ignore[arg-type]

    def test_one_electron_azimuthal_zero(self) -> None:
        assert oracle_one_electron(PM, "attraction", 1.4).value == 0.0


class TestKineticOracle:
    def test_shapes_checked(self) -> None:
        with pytest.raises(OracleUsageError):
            oracle_kinetic([S, S], [S], 0, 0, 3, 1.4, 1000, seed=1)
        with pytest.raises(OracleUsageError, match="needs more electrons"):
            oracle_kinetic([S], [S], 1, 0, 3, 1.4, 1000, seed=1)

    @pytest.mark.slow
    def test_plain_exponential(self) -> None:
        est = oracle_kinetic([S], [S], 0, 0, 3, 2.0, 400_000, seed=21, threads=4)
        expected = 1.5 * math.pi / math.e**2
        assert abs(est.value - expected) <= 3.0 * est.standard_error + 1e-3 * expected

    @pytest.mark.slow
    def test_correlated_kinetic(self) -> None:
        R = 1.4
        series = kinetic_energy([S, S2], [S, S2], 1, 0, R, CTRL)
        est = oracle_kinetic([S, S2], [S, S2], 1, 0, 3, R, 1_000_000, seed=22, threads=4)
        assert abs(est.value - series.value) <= 3.0 * est.standard_error + 1e-3 * abs(series.value)


def _within_three_sigma(est: OracleEstimate, value: float) -> bool:
    return abs(est.value - value) <= 3.0 * est.standard_error


@pytest.mark.slow
class TestAcceptance:
    R = 1.4

    def test_inv_r12_against_monte_carlo(self) -> None:
        series = two_electron(IntegralKind.INV_R12, S, SB, self.R, CTRL)
        est = monte_carlo(integrand_for(IntegralKind.INV_R12, (S, SB)), self.R, 1_000_000, seed=31, threads=4)
        assert series.converged
        assert _within_three_sigma(est, series.value)

    def test_r12_against_monte_carlo(self) -> None:
        series = two_electron(IntegralKind.R12, S, SB, self.R, CTRL)
        est = monte_carlo(integrand_for(IntegralKind.R12, (S, SB)), self.R, 1_000_000, seed=32, threads=4)
        assert _within_three_sigma(est, series.value)

    def test_r12_cubed_against_monte_carlo(self) -> None:
        series = two_electron(IntegralKind.R12_CUB, S, SB, self.R, CTRL)
        est = monte_carlo(integrand_for(IntegralKind.R12_CUB, (S, SB)), self.R, 1_000_000, seed=34, threads=4)
        assert _within_three_sigma(est, series.value)

    @pytest.mark.parametrize(("a", "b"), [(S2, S2), (S, S)])
    def test_inv_r12_sq_against_monte_carlo(self, a: OrbitalParams, b: OrbitalParams) -> None:
        R = 2.0
        series = two_electron(IntegralKind.INV_R12_SQ, a, b, R, CTRL)
        est = monte_carlo(integrand_for(IntegralKind.INV_R12_SQ, (a, b)), R, 1_000_000, seed=35, threads=4)
        assert math.isfinite(series.value)
        assert _within_three_sigma(est, series.value)

    def test_inv_r12_with_azimuthal_pair(self) -> None:
        # e^{iφ₁} against e^{−iφ₂}
        series = two_electron(IntegralKind.INV_R12, PM, PMC, self.R, CTRL)
        est = monte_carlo(integrand_for(IntegralKind.INV_R12, (PM, PMC)), self.R, 1_000_000, seed=36, threads=4)
        assert series.value != 0.0
        assert _within_three_sigma(est, series.value)

    @pytest.mark.parametrize(
        ("kind", "seed"),
        [
            (IntegralKind.R12_R13, 33),
            (IntegralKind.R12_OVER_R13, 37),
            (IntegralKind.R12R13_OVER_R23, 38),
            (IntegralKind.R13SQ_OVER_R12, 39),
            (IntegralKind.INV_R12_R13, 40),
        ],
    )
    def test_three_electron_against_monte_carlo(self, kind: IntegralKind, seed: int) -> None:
        orbitals = (S, S2, SB)
        series = three_electron(kind, *orbitals, self.R, CTRL)
        est = oracle_many_electron(kind, orbitals, self.R, MIN_MANY_ELECTRON_SAMPLES, seed=seed, threads=4)
        assert _within_three_sigma(est, series.value)

    @pytest.mark.parametrize(
        ("kind", "seed"),
        [
            (IntegralKind.R12R13_OVER_R14, 41),
            (IntegralKind.R23R14_OVER_R12, 42),
            (IntegralKind.R23R12_OVER_R14, 43),
        ],
    )
    def test_four_electron_against_monte_carlo(self, kind: IntegralKind, seed: int) -> None:
        orbitals = (S, S2, SB, S)
        series = four_electron(kind, *orbitals, self.R, CTRL)
        est = oracle_many_electron(kind, orbitals, self.R, MIN_MANY_ELECTRON_SAMPLES, seed=seed, threads=4)
        assert _within_three_sigma(est, series.value)

    def test_three_electron_with_azimuthal_pair(self) -> None:
        orbitals = (PM, PMC, S)
        series = three_electron(IntegralKind.R12_R13, *orbitals, self.R, CTRL)
        est = oracle_many_electron(
            IntegralKind.R12_R13, orbitals, self.R, MIN_MANY_ELECTRON_SAMPLES, seed=44, threads=4
        )
        assert _within_three_sigma(est, series.value)

    @pytest.mark.parametrize(
        ("bra", "ket", "bra_pair", "seed"),
        [
            ((S, S2), (S, S2), 2, 45),
            ((S, S2, S), (S, S2, SB), 3, 46),
        ],
    )
    def test_kinetic_with_both_powers(
        self, bra: tuple[OrbitalParams, ...], ket: tuple[OrbitalParams, ...], bra_pair: int, seed: int
    ) -> None:
        series = kinetic_energy(list(bra), list(ket), 1, 1, self.R, CTRL, bra_pair=bra_pair)
        est = oracle_kinetic(list(bra), list(ket), 1, 1, bra_pair, self.R, 1_000_000, seed=seed, threads=4)
        # the 7-point Laplacian carries an O(h²) bias on top of the sampling error
        assert abs(est.value - series.value) <= 3.0 * est.standard_error + 1e-3 * abs(series.value)
