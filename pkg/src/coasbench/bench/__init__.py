from .config import (
    ConfigError,
    ExperimentConfig,
    ForestShape,
    MaxLeaves,
    NumPrototypes,
    load_config,
    size_tag,
)
from .runner import run
from .report import report

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ForestShape",
    "MaxLeaves",
    "NumPrototypes",
    "load_config",
    "size_tag",
    "run",
    "report",
]
