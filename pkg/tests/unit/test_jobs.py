"""Tests for pci.jobs — job loading, schema and invariant checks."""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from pci.core.errors import JobInvalid, JobNotFound, JobTooLarge, OracleUsageError
from pci.core.models import IntegralKind, OracleMode
from pci.jobs import ControlsSpec, OracleSpec, OrbitalSpec, load_job, validate_job
from pci.modules.grid import GridSpec
from pci.modules.orbitals import OrbitalParams
from pci.modules.series import SeriesControls

EXAMPLE_JOB = Path(__file__).resolve().parents[2] / "jobs" / "example_job.yaml"

VALID = """\
R: 1.4
orbitals:
  s: {alpha: 1.0}
  t: [1, 0, 0, 0, 2.0, 0.5, 0]
requests:
  - kind: inv_r12
    orbitals: [s, t]
"""


def _write(tmp_path: Path, body: str, name: str = "job.yaml") -> Path:
    path = tmp_path / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return path


def _errors(tmp_path: Path, body: str) -> list[str]:
    job, errors = validate_job(_write(tmp_path, body))
    assert job is None
    return errors


class TestOrbitalSpec:
    def test_mapping_defaults(self) -> None:
        assert OrbitalSpec(alpha=1.5).params() == OrbitalParams(alpha=1.5)

    def test_list_form(self) -> None:
        spec = OrbitalSpec.model_validate([1, 2, 1, 1, 0.5, -0.2, 1])
        assert spec.params() == OrbitalParams(1, 2, 1, 1, 0.5, -0.2, 1)

    def test_list_length_checked(self) -> None:
        with pytest.raises(ValueError, match="7 entries"):
            OrbitalSpec.model_validate([0, 0, 1.0])


class TestOracleSpec:
    @pytest.mark.parametrize("text", ["off", "auto", " auto "])
    def test_modes(self, text: str) -> None:
        spec = OracleSpec.parse(text)
        assert spec.samples is None and spec.seed is None

    def test_monte_carlo(self) -> None:
        spec = OracleSpec.parse("mc:250000:42")
        assert spec == OracleSpec(mode=OracleMode.MC, samples=250_000, seed=42)

    @pytest.mark.parametrize("text", ["bogus", "auto:3", "mc", "mc:10", "mc:a:b", "mc:0:1", "mc:1:2:3"])
    def test_rejects(self, text: str) -> None:
        with pytest.raises(OracleUsageError):
            OracleSpec.parse(text)


class TestControlsSpec:
    def test_unset_fields_fall_back(self) -> None:
        defaults = SeriesControls(mu_max=20, rel_tol=1e-8)
        assert ControlsSpec().resolve(defaults) == defaults

    def test_overrides(self) -> None:
        ctrl = ControlsSpec(mu_max=12, grid="32:8").resolve(SeriesControls())
        assert ctrl.mu_max == 12
        assert ctrl.grid == GridSpec(outer_panels=32, nodes_per_panel=8)
        assert ctrl.rel_tol == SeriesControls().rel_tol

    def test_bad_grid(self) -> None:
        with pytest.raises(ValueError, match="PANELS:NODES"):
            ControlsSpec(grid="fine")


class TestLoadJob:
    def test_valid(self, tmp_path: Path) -> None:
        job = load_job(_write(tmp_path, VALID))
        assert job.R == 1.4
        assert job.requests[0].kind is IntegralKind.INV_R12
        assert job.resolve(("s", "t")) == (OrbitalParams(alpha=1.0), OrbitalParams(1, 0, 0, 0, 2.0, 0.5, 0))
        assert job.oracle.mode is OracleMode.OFF

    def test_example_job_is_valid(self) -> None:
        job, errors = validate_job(EXAMPLE_JOB)
        assert errors == []
        assert job is not None
        assert {r.kind for r in job.requests} >= {IntegralKind.KINETIC, IntegralKind.R23R14_OVER_R12}

    def test_json_goes_through_the_same_parser(self, tmp_path: Path) -> None:
        body = '{"R": 2.0, "orbitals": {"s": {"alpha": 1.0}}, "requests": [{"kind": "overlap", "orbitals": ["s"]}]}'
        job = load_job(_write(tmp_path, body, "job.json"))
        assert job.requests[0].kind is IntegralKind.OVERLAP

    def test_missing(self, tmp_path: Path) -> None:
        with pytest.raises(JobNotFound):
            load_job(tmp_path / "nope.yaml")

    def test_too_large(self, tmp_path: Path) -> None:
        path = _write(tmp_path, VALID)
        with pytest.raises(JobTooLarge, match="limit"):
            load_job(path, max_size_bytes=10)
        job, errors = validate_job(path, max_size_bytes=10)
        assert job is None
        assert len(errors) == 1 and errors[0].startswith("<file>:")

    def test_not_utf8(self, tmp_path: Path) -> None:
        path = tmp_path / "job.yaml"
        path.write_bytes(b"R: 1.4\n\xff\xfe\n")
        with pytest.raises(JobInvalid, match="UTF-8"):
            load_job(path)

    def test_parse_error(self, tmp_path: Path) -> None:
        with pytest.raises(JobInvalid, match="parse error"):
            load_job(_write(tmp_path, "R: [1.4,\n"))

    def test_root_must_be_mapping(self, tmp_path: Path) -> None:
        with pytest.raises(JobInvalid) as exc_info:
            load_job(_write(tmp_path, "- 1\n- 2\n"))
        assert exc_info.value.errors[0].startswith("<root>:")


class TestJobErrors:
    def test_missing_alpha_names_the_field(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("s: {alpha: 1.0}", "s: {p: 1}"))
        assert any(e.startswith("orbitals.s.alpha:") for e in errors)

    def test_nonpositive_alpha(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("alpha: 1.0", "alpha: 0.0"))
        assert any(e.startswith("orbitals.s.alpha:") for e in errors)

    def test_zero_separation(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("R: 1.4", "R: 0"))
        assert any(e.startswith("R:") for e in errors)

    def test_unknown_field(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID + "extra: 1\n")
        assert any(e.startswith("extra:") for e in errors)

    def test_unknown_kind(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("kind: inv_r12", "kind: r12_to_the_fourth"))
        assert any(e.startswith("requests.0.kind:") for e in errors)

    def test_unknown_orbital(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("orbitals: [s, t]", "orbitals: [s, x]"))
        assert errors == ["requests.0.orbitals.1: unknown orbital 'x'"]

    def test_electron_count(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("orbitals: [s, t]", "orbitals: [s, t, s]"))
        assert errors == ["requests.0.orbitals: inv_r12 needs 2 orbitals, got 3"]

    def test_one_body_fields_on_correlated_kind(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID + "    l: 1\n    Z_a: 2.0\n")
        assert "requests.0.l: applies to overlap, kinetic and nuclear_attraction only" in errors
        assert "requests.0.Z_a: applies to overlap, kinetic and nuclear_attraction only" in errors

    def test_power_range(self, tmp_path: Path) -> None:
        body = VALID.replace("kind: inv_r12", "kind: overlap") + "    l: 3\n"
        errors = _errors(tmp_path, body)
        assert any(e.startswith("requests.0.l:") for e in errors)

    def test_too_few_electrons_for_powers(self, tmp_path: Path) -> None:
        body = VALID.replace("kind: inv_r12", "kind: overlap") + "    l_prime: 1\n"
        errors = _errors(tmp_path, body)
        assert errors == ["requests.0: (l, l_prime) = (0, 1) needs 3 electrons, got 2"]

    def test_kinetic_shape(self, tmp_path: Path) -> None:
        body = VALID.replace(
            "  - kind: inv_r12\n    orbitals: [s, t]\n",
            "  - kind: kinetic\n    bra: [s, t]\n    ket: [s]\n",
        )
        errors = _errors(tmp_path, body)
        assert errors == ["requests.0.ket: bra has 2 orbitals, ket has 1"]

    def test_kinetic_takes_bra_and_ket(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID.replace("kind: inv_r12", "kind: kinetic"))
        assert "requests.0.orbitals: kinetic takes bra and ket, not orbitals" in errors
        assert "requests.0: kinetic needs non-empty bra and ket" in errors

    def test_closed_form_outside_its_case(self, tmp_path: Path) -> None:
        body = VALID.replace(
            "  - kind: inv_r12\n    orbitals: [s, t]\n",
            "  - kind: kinetic\n    bra: [s, t]\n    ket: [s, t]\n    l: 1\n    closed_form: true\n",
        )
        errors = _errors(tmp_path, body)
        assert errors == ["requests.0.closed_form: only kinetic with bra_pair=2 and l=l_prime=1 has a closed form"]

    def test_bad_oracle_block(self, tmp_path: Path) -> None:
        errors = _errors(tmp_path, VALID + "oracle: {mode: sometimes}\n")
        assert any(e.startswith("oracle.mode:") for e in errors)

    def test_all_violations_reported(self, tmp_path: Path) -> None:
        body = VALID + "  - kind: r12\n    orbitals: [x]\n"
        errors = _errors(tmp_path, body)
        assert "requests.1.orbitals: r12 needs 2 orbitals, got 1" in errors
        assert "requests.1.orbitals.0: unknown orbital 'x'" in errors

    def test_mu_max_below_azimuthal_order(self, tmp_path: Path) -> None:
        body = (
            "R: 1.4\norbitals:\n  pm: {gamma: 1, nu: 1, alpha: 1.2, m: 1}\n  pc: {gamma: 1, nu: 1, alpha: 1.0, m: -1}\n"
            "requests:\n  - kind: inv_r12\n    orbitals: [pm, pc]\ncontrols: {mu_max: 0}\n"
        )
        assert _errors(tmp_path, body) == ["controls.mu_max: 0 is below |m| = 1 of orbital 'pc'"]

    def test_mu_max_reaching_azimuthal_order(self, tmp_path: Path) -> None:
        body = (
            "R: 1.4\norbitals:\n  pm: {gamma: 1, nu: 1, alpha: 1.2, m: 1}\n  pc: {gamma: 1, nu: 1, alpha: 1.0, m: -1}\n"
            "requests:\n  - kind: inv_r12\n    orbitals: [pm, pc]\ncontrols: {mu_max: 1}\n"
        )
        job, errors = validate_job(_write(tmp_path, body))
        assert errors == []
        assert job is not None and job.controls.mu_max == 1

    def test_unused_orbitals_do_not_bound_mu_max(self, tmp_path: Path) -> None:
        extra = "  d: {gamma: 2, nu: 2, alpha: 1.0, m: 2}\nrequests:"
        body = VALID.replace("requests:", extra) + "controls: {mu_max: 1}\n"
        _, errors = validate_job(_write(tmp_path, body))
        assert errors == []
