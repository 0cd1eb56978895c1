"""PCI runtime settings (Pydantic v2 Settings).

Centralises every configurable path and numerical default so that:

* The CLI never hard-codes relative paths.
* Environment overrides work (``PCI_MU_MAX``, ``PCI_MC_SEED``, etc.).
* Tests can inject a custom root via ``Settings(repo_root=tmp_path)``.

Usage
-----
::

    from pci.core.settings import get_settings

    s = get_settings()
    ctrl = s.series_controls()
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pci.core.paths import find_repo_root
from pci.modules.grid import GridSpec
from pci.modules.series import SeriesControls


class Settings(BaseSettings):
    """All runtime configuration for PCI.

    *repo_root* anchors every derived path.  If not supplied, it is
    auto-detected via :func:`pci.core.paths.find_repo_root`.
    """

    model_config = SettingsConfigDict(
        env_prefix="PCI_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # ── Root ────────────────────────────────────────────────
    repo_root: Path | None = None

    # ── Derived directory paths ─────────────────────────────
    jobs_dir: Path | None = None
    reports_dir: Path | None = None

    # ── Job files ───────────────────────────────────────────
    job_max_size_kb: int = 256

    # ── Logging ─────────────────────────────────────────────
    log_level: str = "INFO"
    log_json: bool = True

    # ── Series defaults ─────────────────────────────────────
    mu_max: int = Field(default=30, ge=0)
    rel_tol: float = Field(default=1e-10, gt=0.0)
    min_shells: int = Field(default=4, ge=1)
    outer_panels: int = Field(default=64, ge=1)
    nodes_per_panel: int = Field(default=16, ge=2)
    first_step: float = Field(default=1e-8, gt=0.0)
    threads: int = Field(default=1, ge=1)

    # ── Oracles ─────────────────────────────────────────────
    mc_samples: int = Field(default=1_000_000, ge=1)
    mc_seed: int = 20240601
    oracle_order: int = Field(default=24, ge=2)
    oracle_rel_tol: float = Field(default=1e-6, gt=0.0)

    @model_validator(mode="after")
    def _resolve_paths(self) -> "Settings":
        """Fill in any path that was not explicitly overridden."""
        if self.repo_root is None:
            self.repo_root = find_repo_root()

        root = self.repo_root
        defaults: dict[str, Path] = {
            "jobs_dir": root / "jobs",
            "reports_dir": root / "reports",
        }
        for attr, default_val in defaults.items():
            if getattr(self, attr) is None:
                setattr(self, attr, default_val)
        return self

    # ── Convenience ─────────────────────────────────────────
    @property
    def job_max_size_bytes(self) -> int:
        return self.job_max_size_kb * 1024

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            outer_panels=self.outer_panels,
            nodes_per_panel=self.nodes_per_panel,
            first_step=self.first_step,
        )

    def series_controls(self) -> SeriesControls:
        """Default series controls for requests that do not override them."""
        return SeriesControls(
            mu_max=self.mu_max,
            rel_tol=self.rel_tol,
            min_shells=self.min_shells,
            grid=self.grid_spec(),
        )

    def ensure_dirs(self) -> None:
        """Create the reports directory if it doesn't exist."""
        assert self.reports_dir is not None  # guaranteed after validation
        self.reports_dir.mkdir(parents=True, exist_ok=True)


@lru_cache(maxsize=1)
def get_settings(**overrides: object) -> Settings:
    """Return a cached :class:`Settings` instance.

    In production the cache avoids repeated filesystem walks.
    In tests, call ``Settings(repo_root=tmp_path)`` directly.
    """
    return Settings(**overrides)  # type: ignore[arg-type]
