"""Contains supporting functions and default budgets used across the analyses."""

import logging
from os import environ
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()


# Number of random restarts for each see-saw search
DEFAULT_RESTARTS = 32
# Maximum number of see-saw sweeps per restart
DEFAULT_SWEEPS = 500
# Number of random product states sampled by the separable fit
DEFAULT_FIT_SAMPLES = 2000
# Bracket width for the strength bisection
DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class Budget:
    """Search budgets shared by every stochastic analysis."""
    restarts: int = DEFAULT_RESTARTS
    sweeps: int = DEFAULT_SWEEPS
    fit_samples: int = DEFAULT_FIT_SAMPLES
    tol: float = DEFAULT_TOL


# Layout of every log record
LOG_FORMAT = "{asctime} {levelname:<7} [{module}] {message}"


def config_log() -> None:
    """
    Terminal logs configuration, copied to PERSISTENCY_LOG_FILE when set.
    """
    handlers = [logging.StreamHandler()]
    log_file = environ.get("PERSISTENCY_LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        format=LOG_FORMAT,
        style="{",
        datefmt="%Y-%m-%d %H:%M:%S",
        level=environ.get("PERSISTENCY_LOG_LEVEL", "INFO").upper(),
        handlers=handlers,
    )


def validate_budget(budget: Budget) -> None:
    """
    Raises an error if any budget value is not positive.
    """
    bad_fields = [name for name, value in vars(budget).items() if value <= 0]
    if bad_fields:
        raise ValueError(f"Budget values must be positive: {bad_fields}")


def get_budget(**overrides) -> Budget:
    """
    Returns the search budget, read from the environment
    with module defaults as fallback.
    Keyword arguments that are not None take precedence.
    """
    budget = {
        "restarts": int(environ.get("PERSISTENCY_RESTARTS", DEFAULT_RESTARTS)),
        "sweeps": int(environ.get("PERSISTENCY_SWEEPS", DEFAULT_SWEEPS)),
        "fit_samples": int(environ.get("PERSISTENCY_FIT_SAMPLES", DEFAULT_FIT_SAMPLES)),
        "tol": float(environ.get("PERSISTENCY_TOL", DEFAULT_TOL)),
    }
    budget.update({key: value for key, value in overrides.items()
                   if value is not None})
    result = Budget(**budget)
    validate_budget(result)
    return result


def sub_seed(seed: int, index: int) -> int:
    """
    Derives the seed for one subset of an analysis,
    so results do not depend on scheduling.
    """
    return (seed ^ (index * 0x9E3779B1)) & 0xFFFFFFFFFFFFFFFF
