"""Tests for pci.modules.series — shell summation and result algebra."""

from __future__ import annotations

import math

import pytest

from pci.modules.series import SeriesControls, SeriesResult, ShellTerm, combine, product, sum_shells


def _geometric(ratio: float):
    return lambda n: (ratio**n, 1)


class TestSumShells:
    def test_geometric_series_converges(self) -> None:
        result = sum_shells(_geometric(0.1), SeriesControls(rel_tol=1e-10), label="geo")
        assert result.converged
        assert result.value == pytest.approx(1.0 / 0.9, rel=1e-9)
        # stops once two consecutive shells fall below tolerance
        assert [s.mu for s in result.shells] == list(range(12))
        assert result.trunc_error == pytest.approx(1e-10 + 1e-11, rel=1e-12)

    def test_hitting_mu_max_is_not_an_error(self) -> None:
        result = sum_shells(lambda n: (1.0, 1), SeriesControls(mu_max=5), label="flat")
        assert not result.converged
        assert result.value == 6.0
        assert len(result.shells) == 6
        assert result.trunc_error == 2.0

    def test_min_shells_respected(self) -> None:
        result = sum_shells(lambda n: (0.0, 1), SeriesControls(min_shells=4), label="zero")
        assert result.converged
        assert result.value == 0.0
        assert len(result.shells) == 4

    def test_empty_shells_recorded_but_not_counted(self) -> None:
        def shell(n: int) -> tuple[float, int]:
            return (0.0, 0) if n < 3 else (0.5 ** (n - 3), 1)

        ctrl = SeriesControls(rel_tol=1e-3, min_shells=4)
        result = sum_shells(shell, ctrl, label="late")
        assert [s.terms for s in result.shells[:3]] == [0, 0, 0]
        assert result.converged
        assert result.value == pytest.approx(2.0, rel=2e-3)
        # the error estimate ignores the empty shells
        live = [s.value for s in result.shells if s.terms][-2:]
        assert result.trunc_error == pytest.approx(sum(abs(v) for v in live))

    @pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
    def test_non_finite_shell_is_never_converged(self, bad: float) -> None:
        def shell(n: int) -> tuple[float, int]:
            return (bad, 1) if n == 2 else (0.0, 1)

        result = sum_shells(shell, SeriesControls(min_shells=1), label="blowup")
        assert not result.converged
        assert math.isnan(result.value)
        assert result.trunc_error == math.inf
        # summation stops at the offending shell
        assert [s.mu for s in result.shells] == [0, 1, 2]

    def test_overflowing_total_is_never_converged(self) -> None:
        big = 1.5e308
        result = sum_shells(lambda n: (big, 1), SeriesControls(min_shells=1), label="overflow")
        assert not result.converged
        assert math.isnan(result.value)
        assert len(result.shells) == 2

    def test_first_shell(self) -> None:
        result = sum_shells(_geometric(0.5), SeriesControls(rel_tol=1e-6), label="geo", first_shell=2)
        assert result.shells[0].mu == 2
        assert result.value == pytest.approx(0.5, rel=1e-5)


class TestSeriesAlgebra:
    def test_zero(self) -> None:
        z = SeriesResult.zero()
        assert z.value == 0.0 and z.trunc_error == 0.0 and z.converged and z.shells == ()

    def test_exact(self) -> None:
        e = SeriesResult.exact(3.5)
        assert e.converged
        assert e.shells == (ShellTerm(0, 3.5, 1),)

    def test_scaled(self) -> None:
        r = SeriesResult(2.0, 0.1, True, (ShellTerm(0, 1.5, 1), ShellTerm(1, 0.5, 2)))
        s = r.scaled(-2.0)
        assert s.value == -4.0
        assert s.trunc_error == pytest.approx(0.2)
        assert [t.value for t in s.shells] == [-3.0, -1.0]
        assert [t.terms for t in s.shells] == [1, 2]

    def test_combine_merges_shells_and_errors(self) -> None:
        a = SeriesResult(1.0, 0.01, True, (ShellTerm(0, 0.75, 1), ShellTerm(1, 0.25, 1)))
        b = SeriesResult(2.0, 0.02, False, (ShellTerm(1, 2.0, 3),))
        c = combine([(2.0, a), (-1.0, b)])
        assert c.value == pytest.approx(0.0)
        assert c.trunc_error == pytest.approx(0.04)
        assert not c.converged
        assert c.shells == (ShellTerm(0, 1.5, 1), ShellTerm(1, -1.5, 4))

    def test_combine_empty_is_zero(self) -> None:
        assert combine([]) == SeriesResult.zero()

    def test_product_propagates_first_order_error(self) -> None:
        left = SeriesResult(2.0, 0.1, True, (ShellTerm(0, 2.0, 1),))
        right = SeriesResult(-3.0, 0.2, True, (ShellTerm(0, -3.0, 1),))
        p = product(left, right)
        assert p.value == -6.0
        assert p.trunc_error == pytest.approx(2.0 * 0.2 + 3.0 * 0.1)
        assert p.converged

    def test_product_with_exact_is_scaling(self) -> None:
        r = SeriesResult(1.25, 0.01, True, (ShellTerm(0, 1.0, 1), ShellTerm(1, 0.25, 1)))
        p = product(r, SeriesResult.exact(4.0))
        assert p.value == pytest.approx(5.0)
        assert p.trunc_error == pytest.approx(0.04)
