"""Adaptive training-set sampling: learn the parameters of a sampling
distribution over oracle-uncertainty scores by maximizing held-out accuracy
of a size-constrained model trained on the drawn sample.

The sampling process draws `n_s` instances with replacement: a `p_o` fraction
uniformly, the rest with probability proportional to a Beta(a, b) density
evaluated at each instance's rescaled uncertainty score. The four quantities
(log10 a, log10 b, n_s, p_o) are tuned by the budgeted black-box maximizer in
`bayesopt`; the training closure runs once per iteration, exactly budget_T
times in total, and the best iterate's model is returned without retraining.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bayesopt import Dim, SearchSpace, maximize
from .learners import rf_fit, rf_predict
from .numerics import Rng

ORACLE_TREES = 100
SCORE_CLAMP = 1e-6


class CoasWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SamplingParams:
    a: float
    b: float
    n_s: int
    p_o: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta shapes must be positive")
        if not (0.0 <= self.p_o <= 1.0):
            raise ValueError("p_o must lie in [0, 1]")
        if self.n_s < 1:
            raise ValueError("n_s must be >= 1")


@dataclass(frozen=True)
class OracleScores:
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        if u.ndim != 1 or (u < 0).any() or (u > 1).any():
            raise ValueError("scores must be a vector in [0, 1]")
        object.__setattr__(self, "u", u)


@dataclass
class CoasTrial:
    params: SamplingParams
    objective: float
    iteration: int
    failed: bool = False


@dataclass
class CoasResult:
    best_params: SamplingParams | None
    best_model: object
    best_val_score: float
    history: list[CoasTrial]


def oracle_scores(X_train, y_train, rng: Rng) -> OracleScores:
    """Per-instance prediction uncertainty from an unconstrained oracle model
    (100-tree forest, no depth cap): 1 - max class probability, min-max
    rescaled over the training set. Constant raw scores become 0.5."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    forest = rf_fit(X_train, y_train, num_trees=ORACLE_TREES, max_depth=None,
                    class_weighting="none", rng=rng)
    _, proba = rf_predict(forest, X_train)
    raw = 1.0 - proba.max(axis=1)
    span = raw.max() - raw.min()
    if span < 1e-12:
        return OracleScores(np.full(len(raw), 0.5))
    return OracleScores((raw - raw.min()) / span)


def _beta_weights(u: np.ndarray, a: float, b: float) -> np.ndarray | None:
    """Unnormalized Beta(a, b) density at clamped scores; None when the
    weights vanish numerically."""
    x = np.clip(u, SCORE_CLAMP, 1.0 - SCORE_CLAMP)
    with np.errstate(over="ignore"):
        w = x ** (a - 1.0) * (1.0 - x) ** (b - 1.0)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        return None
    return w / total


def sample_indices(n: int, scores: OracleScores, params: SamplingParams, rng: Rng) -> np.ndarray:
    """Indices of a with-replacement draw: floor(p_o * n_s) uniform, the rest
    Beta-weighted over the uncertainty scores."""
    if len(scores.u) != n:
        raise ValueError("scores length must match the training set")
    n_uniform = int(math.floor(params.p_o * params.n_s))
    n_weighted = params.n_s - n_uniform
    parts = []
    if n_uniform:
        parts.append(np.asarray(rng.integers(0, n, size=n_uniform)))
    if n_weighted:
        w = _beta_weights(scores.u, params.a, params.b)
        if w is None:
            warnings.warn("all Beta weights vanished; weighted draw falls back to uniform",
                          CoasWarning)
            parts.append(np.asarray(rng.integers(0, n, size=n_weighted)))
        else:
            parts.append(rng.choice(n, size=n_weighted, p=w))
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def sample(X_train, y_train, scores: OracleScores, params: SamplingParams, rng: Rng):
    X_train = np.asarray(X_train)
    y_train = np.asarray(y_train)
    idx = sample_indices(len(X_train), scores, params, rng)
    return X_train[idx], y_train[idx]


def optimize(
    train_fn,
    metric_fn,
    X_train,
    y_train,
    X_val,
    y_val,
    budget_T: int,
    ns_bounds: tuple[int, int],
    rng: Rng,
    scores: OracleScores | None = None,
    strategy: str = "gp",
    instrument=None,
) -> CoasResult:
    """Tune (a, b, n_s, p_o) with exactly `budget_T` training runs and return
    the best iterate's parameters, fitted model and validation score.

    `train_fn(X_sample, y_sample)` fits the size-constrained model;
    `metric_fn(model, X_val, y_val)` scores it. A failed training run or a
    non-finite score marks the trial failed (objective -inf) and optimization
    continues. `scores` may be precomputed to share one oracle fit across
    several calls; `instrument`, when given, is invoked as instrument(i)
    right before training run i.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    n_lo, n_hi = int(ns_bounds[0]), int(ns_bounds[1])
    if not 1 <= n_lo < n_hi:
        raise ValueError("ns_bounds must satisfy 1 <= N_lo < N_hi")
    if scores is None:
        scores = oracle_scores(X_train, y_train, rng.spawn("oracle"))

    space = SearchSpace(
        [
            Dim("a", "real", 0.1, 10.0, scale="log10"),
            Dim("b", "real", 0.1, 10.0, scale="log10"),
            Dim("n_s", "integer", n_lo, n_hi),
            Dim("p_o", "real", 0.0, 1.0),
        ]
    )

    state = {"i": 0, "best_score": -math.inf, "best_model": None, "best_params": None}

    def objective(raw_params: dict) -> float:
        i = state["i"]
        state["i"] += 1
        params = SamplingParams(a=raw_params["a"], b=raw_params["b"],
                                n_s=raw_params["n_s"], p_o=raw_params["p_o"])
        Xs, ys = sample(X_train, y_train, scores, params, rng.spawn("draw", i))
        if instrument is not None:
            instrument(i)
        try:
            model = train_fn(Xs, ys)
            score = float(metric_fn(model, X_val, y_val))
        except Exception:
            return -math.inf
        if math.isfinite(score) and score > state["best_score"]:
            state.update(best_score=score, best_model=model, best_params=params)
        return score

    _, bo_history = maximize(objective, space, budget_T, rng.spawn("bo"), strategy=strategy)

    history = [
        CoasTrial(
            params=SamplingParams(a=t.params["a"], b=t.params["b"],
                                  n_s=t.params["n_s"], p_o=t.params["p_o"]),
            objective=t.objective,
            iteration=t.iteration,
            failed=t.failed,
        )
        for t in bo_history
    ]
    return CoasResult(
        best_params=state["best_params"],
        best_model=state["best_model"],
        best_val_score=state["best_score"] if state["best_model"] is not None else -math.inf,
        history=history,
    )
