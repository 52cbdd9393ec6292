"""Tests for the shared configuration helpers."""

import logging
from unittest.mock import patch
import pytest
from utilities import (
    Budget,
    DEFAULT_RESTARTS,
    DEFAULT_TOL,
    LOG_FORMAT,
    config_log,
    get_budget,
    sub_seed,
    validate_budget,
)


@pytest.fixture(autouse=True)
def clear_budget_env(monkeypatch):
    for name in ("PERSISTENCY_RESTARTS", "PERSISTENCY_SWEEPS",
                 "PERSISTENCY_FIT_SAMPLES", "PERSISTENCY_TOL", "PERSISTENCY_LOG_FILE"):
        monkeypatch.delenv(name, raising=False)


def test_get_budget_defaults():
    """Without environment variables the module defaults are used."""
    budget = get_budget()
    assert budget.restarts == DEFAULT_RESTARTS
    assert budget.tol == DEFAULT_TOL


def test_get_budget_reads_environment(monkeypatch):
    """Environment variables replace the defaults."""
    monkeypatch.setenv("PERSISTENCY_RESTARTS", "4")
    monkeypatch.setenv("PERSISTENCY_TOL", "0.01")
    budget = get_budget()
    assert budget.restarts == 4
    assert budget.tol == 0.01


def test_overrides_beat_environment(monkeypatch):
    """Explicit overrides win; None overrides are ignored."""
    monkeypatch.setenv("PERSISTENCY_SWEEPS", "50")
    budget = get_budget(sweeps=7, restarts=None)
    assert budget.sweeps == 7
    assert budget.restarts == DEFAULT_RESTARTS


@pytest.mark.parametrize("field_name", ["restarts", "sweeps", "fit_samples", "tol"])
def test_validate_budget_rejects_non_positive(field_name):
    """Zero values are refused."""
    with pytest.raises(ValueError):
        validate_budget(Budget(**{field_name: 0}))


def test_sub_seed_is_deterministic_and_distinct():
    """Sub-seeds depend only on the seed and index."""
    assert sub_seed(42, 3) == sub_seed(42, 3)
    assert len({sub_seed(42, i) for i in range(100)}) == 100
    assert sub_seed(42, 0) == 42


@patch("utilities.logging.basicConfig")
def test_config_log_level_from_environment(mock_config, monkeypatch):
    """The log level comes from PERSISTENCY_LOG_LEVEL."""
    monkeypatch.setenv("PERSISTENCY_LOG_LEVEL", "debug")
    config_log()
    mock_config.assert_called_once()
    assert mock_config.call_args.kwargs["level"] == "DEBUG"
    assert mock_config.call_args.kwargs["style"] == "{"


def test_config_log_defaults_to_info(monkeypatch):
    """INFO when no level is configured."""
    monkeypatch.delenv("PERSISTENCY_LOG_LEVEL", raising=False)
    with patch("utilities.logging.basicConfig") as mock_config:
        config_log()
    assert mock_config.call_args.kwargs["level"] == logging.getLevelName(logging.INFO)


@patch("utilities.logging.basicConfig")
def test_config_log_format_names_module(mock_config, monkeypatch):
    """Records carry the module that logged them, on the terminal only by default."""
    monkeypatch.delenv("PERSISTENCY_LOG_FILE", raising=False)
    config_log()
    kwargs = mock_config.call_args.kwargs
    assert kwargs["format"] == LOG_FORMAT
    assert "[{module}]" in LOG_FORMAT
    assert len(kwargs["handlers"]) == 1
    assert isinstance(kwargs["handlers"][0], logging.StreamHandler)


@patch("utilities.logging.basicConfig")
def test_config_log_copies_to_file(mock_config, monkeypatch, tmp_path):
    """PERSISTENCY_LOG_FILE adds a file handler next to the terminal."""
    path = tmp_path / "analysis.log"
    monkeypatch.setenv("PERSISTENCY_LOG_FILE", str(path))
    config_log()
    handlers = mock_config.call_args.kwargs["handlers"]
    assert len(handlers) == 2
    assert isinstance(handlers[1], logging.FileHandler)
    assert handlers[1].baseFilename == str(path)
    handlers[1].close()
