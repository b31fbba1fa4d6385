"""Adaptive training-set sampling for small models, plus the benchmark harness
used to compare it against task-specific baselines."""

from .numerics import Rng, derive_seed
from .coas import CoasResult, OracleScores, SamplingParams, optimize, oracle_scores, sample

__version__ = "0.1.0"

__all__ = [
    "Rng",
    "derive_seed",
    "CoasResult",
    "OracleScores",
    "SamplingParams",
    "optimize",
    "oracle_scores",
    "sample",
    "__version__",
]
