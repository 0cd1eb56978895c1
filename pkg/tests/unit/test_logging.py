"""Tests for pci.core.logging — structlog configuration and the numeric sanitiser."""

from __future__ import annotations

import json
import logging

import numpy as np
import pytest
import structlog

from pci.core.logging import _numeric_sanitiser, configure_logging


class TestSanitiser:
    def test_numpy_scalars_become_python_numbers(self) -> None:
        out = _numeric_sanitiser(None, "info", {"a": np.float64(1.5), "n": np.int64(3)})
        assert out == {"a": 1.5, "n": 3}
        assert type(out["a"]) is float and type(out["n"]) is int

    def test_non_finite_floats_become_strings(self) -> None:
        out = _numeric_sanitiser(None, "info", {"x": float("nan"), "y": float("inf"), "z": -np.inf})
        assert out == {"x": "nan", "y": "inf", "z": "-inf"}

    def test_small_arrays_listed_large_summarised(self) -> None:
        out = _numeric_sanitiser(None, "info", {"small": np.arange(3.0), "big": np.zeros((10, 10))})
        assert out["small"] == [0.0, 1.0, 2.0]
        assert out["big"] == {"shape": [10, 10], "dtype": "float64"}

    def test_complex_split(self) -> None:
        out = _numeric_sanitiser(None, "info", {"c": 1 + 2j})
        assert out["c"] == {"re": 1.0, "im": 2.0}


def test_json_output_is_valid_json(capsys: pytest.CaptureFixture[str]) -> None:
    configure_logging(level="INFO", json_output=True)
    structlog.get_logger("pci.test").info("series_converged", value=np.float64(0.5), err=float("nan"))
    line = capsys.readouterr().err.strip().splitlines()[-1]
    record = json.loads(line)
    assert record["event"] == "series_converged"
    assert record["value"] == 0.5
    assert record["err"] == "nan"
    assert record["level"] == "info"
    assert record["thread_name"] == "MainThread"


def test_level_applied_to_root() -> None:
    configure_logging(level="WARNING", json_output=False)
    assert logging.getLogger().level == logging.WARNING
    configure_logging(level="INFO", json_output=True)
