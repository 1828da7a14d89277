"""Effort-based fairness audits and imitation-impact simulation for regression."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Absolute path of a bundled data file (dataset, schema, config)."""
    return Path(resources.files("effortsim").joinpath("data", name))  # type: ignore[arg-type]
