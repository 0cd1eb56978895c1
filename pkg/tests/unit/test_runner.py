"""Tests for pci.runner — control resolution, records, reports and exit status."""

from __future__ import annotations

import hashlib
import json
import textwrap
from pathlib import Path

import pytest

from pci.core.errors import JobInvalid, JobNotFound
from pci.core.models import IntegralKind, OracleMode, Verdict
from pci.core.settings import Settings
from pci.jobs import OracleSpec, load_job
from pci.modules.grid import GridSpec
from pci.runner import (
    EXIT_NUMERIC,
    EXIT_OK,
    REPORT_SCHEMA,
    RunFlags,
    canonical_payload,
    estimate_request,
    resolve_controls,
    resolve_oracle,
    run_job,
)

JOB = """\
R: 1.4
orbitals:
  s:   {alpha: 1.0}
  s2:  {alpha: 2.0}
  sb:  {alpha: 1.5, beta: 0.25}
  pm:  {gamma: 1, nu: 1, alpha: 1.2, m: 1}
  odd: {gamma: 1, alpha: 1.0}
requests:
  - kind: inv_r12
    label: coulomb
    orbitals: [s, sb]
  - kind: r12
    orbitals: [pm, s]
  - kind: overlap
    orbitals: [s, s2]
  - kind: nuclear_attraction
    orbitals: [sb]
    Z_a: 2.0
    Z_b: 1.0
  - kind: kinetic
    bra: [s]
    ket: [sb]
"""


def _job(root: Path, body: str = JOB, name: str = "batch.yaml") -> Path:
    path = root / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def outcome(tmp_path_factory: pytest.TempPathFactory):
    root = tmp_path_factory.mktemp("repo")
    return run_job(_job(root), RunFlags(), Settings(repo_root=root))


class TestResolution:
    def test_flag_beats_job_beats_settings(self, tmp_path: Path) -> None:
        body = JOB + "controls:\n  mu_max: 12\n  rel_tol: 1.0e-8\n"
        job = load_job(_job(tmp_path, body))
        settings = Settings(repo_root=tmp_path, min_shells=6)
        ctrl = resolve_controls(job, RunFlags(mu_max=20, grid=GridSpec(outer_panels=8, nodes_per_panel=4)), settings)
        assert ctrl.mu_max == 20
        assert ctrl.rel_tol == 1e-8
        assert ctrl.min_shells == 6
        assert ctrl.grid == GridSpec(outer_panels=8, nodes_per_panel=4)

    def test_oracle_defaults_from_settings(self, tmp_path: Path) -> None:
        job = load_job(_job(tmp_path, JOB + "oracle: {mode: auto}\n"))
        settings = Settings(repo_root=tmp_path, mc_samples=5000, mc_seed=9)
        spec = resolve_oracle(job, RunFlags(), settings)
        assert spec == OracleSpec(mode=OracleMode.AUTO, samples=5000, seed=9)

    def test_oracle_flag_wins(self, tmp_path: Path) -> None:
        job = load_job(_job(tmp_path, JOB + "oracle: {mode: auto}\n"))
        spec = resolve_oracle(job, RunFlags(oracle=OracleSpec.parse("off")), Settings(repo_root=tmp_path))
        assert spec.mode is OracleMode.OFF


class TestReport:
    def test_written_to_reports_dir(self, outcome) -> None:
        assert outcome.report_path.name == "batch.report.json"
        assert outcome.report_path.parent.name == "reports"
        on_disk = json.loads(outcome.report_path.read_text(encoding="utf-8"))
        assert on_disk == outcome.report

    def test_header(self, outcome) -> None:
        report = outcome.report
        assert report["schema"] == REPORT_SCHEMA
        assert report["job"] == "batch.yaml"
        assert report["R"] == 1.4
        assert report["controls"] == {"mu_max": 30, "rel_tol": 1e-10, "min_shells": 4, "grid": "64:16"}
        assert report["oracle"] == {"mode": "off", "samples": None, "seed": None}
        assert report["exit_status"] == EXIT_OK == outcome.exit_code

    def test_records_in_request_order(self, outcome) -> None:
        records = outcome.report["records"]
        assert [r["index"] for r in records] == [0, 1, 2, 3, 4]
        assert [r["kind"] for r in records] == ["inv_r12", "r12", "overlap", "nuclear_attraction", "kinetic"]
        assert records[0]["label"] == "coulomb"
        assert "label" not in records[1]

    def test_record_fields(self, outcome) -> None:
        first = outcome.report["records"][0]
        assert first["orbitals"] == ["s", "sb"]
        assert first["converged"] is True
        assert first["value"] > 0.0
        assert first["shells"] and {"mu", "value", "terms"} == set(first["shells"][0])
        assert first["oracle"] is None and first["error"] is None
        assert first["wall_time"] >= 0.0

    def test_selection_zero_has_no_shells(self, outcome) -> None:
        zero = outcome.report["records"][1]
        assert zero["value"] == 0.0
        assert zero["shells"] == []
        assert zero["converged"] is True

    def test_one_body_fields(self, outcome) -> None:
        records = outcome.report["records"]
        assert records[2]["l"] == 0 and records[2]["l_prime"] == 0
        assert records[3]["Z_a"] == 2.0 and records[3]["Z_b"] == 1.0
        assert records[3]["value"] < 0.0
        assert records[4]["orbitals"] == {"bra": ["s"], "ket": ["sb"]}
        assert records[4]["bra_pair"] == 3 and records[4]["closed_form"] is False

    def test_digest_is_sha256_of_canonical_payload(self, outcome) -> None:
        report = outcome.report
        expected = hashlib.sha256(canonical_payload(report).encode("utf-8")).hexdigest()
        assert report["payload_digest"] == expected
        assert "wall_time" not in canonical_payload(report)

    def test_digest_independent_of_threads(self, tmp_path: Path, outcome) -> None:
        path = _job(tmp_path)
        settings = Settings(repo_root=tmp_path)
        parallel = run_job(path, RunFlags(out=tmp_path / "parallel.json", threads=4), settings)
        assert parallel.report["payload_digest"] == outcome.report["payload_digest"]
        assert [r.result for r in parallel.records] == [r.result for r in outcome.records]


class TestExitStatus:
    def test_unconverged_series_is_numeric_failure(self, tmp_path: Path) -> None:
        body = textwrap.dedent(
            """\
            R: 1.4
            orbitals:
              s: {alpha: 1.0}
            requests:
              - kind: inv_r12
                orbitals: [s, s]
            """
        )
        out = tmp_path / "r.json"
        result = run_job(_job(tmp_path, body), RunFlags(out=out, mu_max=1, rel_tol=1e-15), Settings(repo_root=tmp_path))
        assert result.exit_code == EXIT_NUMERIC
        record = result.report["records"][0]
        assert record["converged"] is False
        assert record["value"] is not None
        assert result.report["controls"]["mu_max"] == 1

    def test_failing_request_is_recorded(self, tmp_path: Path) -> None:
        body = JOB.replace("orbitals: [s, sb]", "orbitals: [odd, s]")
        result = run_job(_job(tmp_path, body), RunFlags(out=tmp_path / "r.json"), Settings(repo_root=tmp_path))
        assert result.exit_code == EXIT_NUMERIC
        failed = result.report["records"][0]
        assert failed["value"] is None
        assert failed["error"].startswith("ParityUnsupported:")
        # the other requests still ran
        assert all(r["error"] is None for r in result.report["records"][1:])

    def test_inverse_cube_is_an_error_record(self, tmp_path: Path) -> None:
        body = JOB.replace("kind: inv_r12\n", "kind: inv_r12_cub\n")
        result = run_job(_job(tmp_path, body), RunFlags(out=tmp_path / "r.json"), Settings(repo_root=tmp_path))
        assert result.exit_code == EXIT_NUMERIC
        failed = result.report["records"][0]
        assert failed["kind"] == "inv_r12_cub"
        assert failed["value"] is None
        assert failed["error"].startswith("UnsupportedIntegral:")
        assert "not absolutely integrable" in failed["error"]

    def test_invalid_job_runs_nothing(self, tmp_path: Path) -> None:
        body = JOB.replace("orbitals: [s, sb]", "orbitals: [s, nope]")
        with pytest.raises(JobInvalid):
            run_job(_job(tmp_path, body), RunFlags(), Settings(repo_root=tmp_path))
        assert not (tmp_path / "reports").exists()

    def test_missing_job(self, tmp_path: Path) -> None:
        with pytest.raises(JobNotFound):
            run_job(tmp_path / "none.yaml", RunFlags(), Settings(repo_root=tmp_path))


class TestOracles:
    ORACLE_JOB = """\
    R: 1.4
    orbitals:
      s:  {alpha: 1.0}
      s2: {alpha: 2.0}
      sb: {alpha: 1.5, beta: 0.25}
    oracle: {mode: auto, samples: 20000, seed: 5}
    requests:
      - kind: r12_sq
        orbitals: [s, sb]
      - kind: overlap
        orbitals: [s, s2]
      - kind: nuclear_attraction
        orbitals: [sb, s]
        Z_a: 1.0
        Z_b: 2.0
      - kind: nuclear_attraction
        orbitals: [s, s2]
        l: 1
    """

    def test_auto_mode_routes(self, tmp_path: Path) -> None:
        path = _job(tmp_path, self.ORACLE_JOB)
        result = run_job(path, RunFlags(out=tmp_path / "r.json"), Settings(repo_root=tmp_path))
        oracles = [r["oracle"] for r in result.report["records"]]
        assert [o["method"] for o in oracles] == ["tensor", "tensor", "tensor", "none"]
        assert [o["verdict"] for o in oracles] == ["pass", "pass", "pass", "skipped"]
        assert oracles[3]["value"] is None
        assert result.report["oracle"] == {"mode": "auto", "samples": 20000, "seed": 5}
        # a skipped comparison never fails a record on its own
        assert all(r.oracle is not None and r.oracle.verdict is not Verdict.FAIL for r in result.records)

    def test_mc_mode_seeds_per_request(self, tmp_path: Path) -> None:
        job = load_job(_job(tmp_path, self.ORACLE_JOB))
        settings = Settings(repo_root=tmp_path)
        spec = OracleSpec(mode=OracleMode.MC, samples=20_000, seed=5)
        found = [estimate_request(job.requests[1], job, spec, settings, i) for i in (0, 1)]
        assert all(f is not None and f[0] == "mc" for f in found)
        first, second = (f[1] for f in found if f is not None)
        assert first.evaluations == 20_000
        assert first.seed != second.seed
        again = estimate_request(job.requests[1], job, spec, settings, 0)
        assert again is not None and again[1] == first

    def test_inverse_cube_has_no_oracle(self, tmp_path: Path) -> None:
        body = self.ORACLE_JOB.replace("kind: r12_sq", "kind: inv_r12_cub")
        job = load_job(_job(tmp_path, body))
        spec = OracleSpec(mode=OracleMode.AUTO, samples=1000, seed=1)
        assert job.requests[0].kind is IntegralKind.INV_R12_CUB
        assert estimate_request(job.requests[0], job, spec, Settings(repo_root=tmp_path), 0) is None

    def test_verdict_enum_values(self) -> None:
        assert {v.value for v in Verdict} == {"pass", "fail", "skipped"}
