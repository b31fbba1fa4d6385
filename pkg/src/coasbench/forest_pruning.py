"""Forest pruning baselines: two-phase pruning (out-of-bag ranking followed
by greedy Brier-score screening) and subforest forward selection by
incremental predictive power.

Both return a forest of exactly the requested number of trees, drawn from the
input forest, predicting through the usual probability-averaging contract.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .evalstats import f1_macro
from .learners import Forest, cart_predict_proba


class PruningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PruneConfig:
    target_trees: int
    m_fraction: float = 0.2
    initial_trees: int = 100
    strict_improvement: bool = True  # phase-2 Brier comparison: < vs <=

    def __post_init__(self):
        if not (0 < self.m_fraction <= 1):
            raise ValueError("m_fraction must lie in (0, 1]")
        if self.target_trees < 1:
            raise ValueError("target_trees must be >= 1")


def brier_score(prob_matrix, y) -> float:
    """Mean over instances of the squared distance between the probability
    row and the one-hot true label."""
    P = np.asarray(prob_matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if P.ndim != 2 or len(P) != len(y):
        raise ValueError("prob_matrix must be (N, C) aligned with y")
    if np.abs(P.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("probability rows must sum to 1")
    onehot = np.eye(P.shape[1])[y]
    return float(((P - onehot) ** 2).sum(axis=1).mean())


def _subforest(f: Forest, keep: list[int]) -> Forest:
    return Forest(
        trees=[f.trees[i] for i in keep],
        oob_masks=f.oob_masks[keep],
        num_trees=len(keep),
        max_depth=f.max_depth,
        n_classes=f.n_classes,
        n_features=f.n_features,
    )


def oob_accuracies(f: Forest, X_train, y_train) -> np.ndarray:
    """Per-tree accuracy on its out-of-bag instances (0 when none, with a
    warning)."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    accs = np.zeros(f.num_trees)
    for t, tree in enumerate(f.trees):
        mask = f.oob_masks[t]
        if not mask.any():
            warnings.warn(f"tree {t} has an empty out-of-bag set; accuracy set to 0",
                          PruningWarning)
            continue
        proba = cart_predict_proba(tree, X_train[mask])
        accs[t] = float((np.argmax(proba, axis=1) == y_train[mask]).mean())
    return accs


def ote_prune(f: Forest, X_train, y_train, X_val, y_val, cfg: PruneConfig) -> Forest:
    """Phase 1 keeps the top ceil(m_fraction * num_trees) trees by individual
    out-of-bag accuracy (ties to the lower tree index). Phase 2 seeds the
    ensemble with the top tree and scans the rest in rank order, accepting a
    tree only if it strictly lowers the validation Brier score; remaining
    slots are filled with the best unaccepted ranked trees."""
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    m_keep = int(np.ceil(cfg.m_fraction * f.num_trees))
    if cfg.target_trees > m_keep:
        raise ValueError(f"target_trees={cfg.target_trees} exceeds phase-1 retention {m_keep}")
    accs = oob_accuracies(f, X_train, y_train)
    ranked = np.argsort(-accs, kind="stable")[:m_keep].tolist()

    proba = [cart_predict_proba(f.trees[i], X_val) for i in ranked]
    accepted = [0]  # phase-2 seed: best-OOB tree
    running = proba[0].copy()
    current = brier_score(running, y_val)
    for pos in range(1, len(ranked)):
        if len(accepted) == cfg.target_trees:
            break
        cand = (running * len(accepted) + proba[pos]) / (len(accepted) + 1)
        cand_brier = brier_score(cand, y_val)
        improved = cand_brier < current if cfg.strict_improvement else cand_brier <= current
        if improved:
            accepted.append(pos)
            running = cand
            current = cand_brier
    if len(accepted) < cfg.target_trees:  # fill with best remaining ranked trees
        rest = [p for p in range(len(ranked)) if p not in accepted]
        accepted.extend(rest[: cfg.target_trees - len(accepted)])
    return _subforest(f, [ranked[p] for p in accepted])


def subforest_prune(f: Forest, X_val, y_val, target_trees: int) -> Forest:
    """Greedy forward selection: repeatedly add the tree that maximizes the
    validation F1 of the augmented ensemble (ties to the lowest tree index)."""
    if target_trees > f.num_trees or target_trees < 1:
        raise ValueError("target_trees must lie in [1, num_trees]")
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    proba = [cart_predict_proba(t, X_val) for t in f.trees]
    chosen: list[int] = []
    running = np.zeros_like(proba[0])
    while len(chosen) < target_trees:
        best = None
        for i in range(f.num_trees):
            if i in chosen:
                continue
            cand = (running + proba[i]) / (len(chosen) + 1)
            score = f1_macro(y_val, np.argmax(cand, axis=1), f.n_classes)
            if best is None or score > best[0]:
                best = (score, i)
        chosen.append(best[1])
        running = running + proba[best[1]]
    return _subforest(f, chosen)
