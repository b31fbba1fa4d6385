"""Per-task method adapters: one function per (task, method) that takes a
prepared cell context and returns (metric_value, aux dict).

Fairness conventions: the reference clustering (task 1) and the train/test
split (tasks 2 and 3) are derived from seeds that do not include the method
name, so competing methods see identical data within a trial. Everything a
method randomizes internally uses the method-specific cell seed.
"""
from __future__ import annotations

import numpy as np

from .. import coas
from ..data import Dataset, split, stratified_subsample
from ..evalstats import f1_macro
from ..expclust import evaluate_tree, explain_with_cart, imm_fit
from ..forest_pruning import PruneConfig, ote_prune, subforest_prune
from ..learners import kmeans_fit, rf_fit, rf_predict
from ..numerics import Rng, derive_seed
from ..prototypes import (
    c_rbfn_fit,
    fcnn1_fit,
    km_rbfn_fit,
    one_nn_predict,
    protonn_fit,
    protonn_predict,
    rbfn_predict,
    snc_fit,
    snc_predict,
)
from .config import ExperimentConfig, ForestShape, MaxLeaves, NumPrototypes

KMEANS_REFERENCE_RESTARTS = 10
OTE_INITIAL_TREES = 100
RF_NS_LOWER = 30


def _effective_dataset(cfg: ExperimentConfig, ds: Dataset, trial: int) -> Dataset:
    """Per-trial deterministic stratified subsample (shared across methods)."""
    if cfg.subsample_n is None or cfg.subsample_n >= ds.n:
        return ds
    sub_seed = derive_seed(cfg.seed, ds.name, "subsample", trial)
    return stratified_subsample(ds, cfg.subsample_n, Rng(sub_seed))


def _params_aux(result: coas.CoasResult) -> dict:
    if result is None or result.best_params is None:
        return {}
    p = result.best_params
    return {"a": round(p.a, 6), "b": round(p.b, 6), "n_s": p.n_s, "p_o": round(p.p_o, 6)}


# ---------------------------------------------------------------------------
# Task 1: explainable clustering (train = val = test = full dataset)
# ---------------------------------------------------------------------------


def run_expclust_cell(cfg: ExperimentConfig, ds: Dataset, size: MaxLeaves,
                      method: str, trial: int, cell_seed: int):
    ds = _effective_dataset(cfg, ds, trial)
    X = ds.features
    if cfg.standardize:
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=0)
        X = (X - mean) / np.where(sd > 0, sd, 1.0)
    ref_seed = derive_seed(cfg.seed, ds.name, "kmeans_ref", size.k, trial)
    reference = kmeans_fit(X, size.k, Rng(ref_seed), n_restarts=KMEANS_REFERENCE_RESTARTS)
    rng = Rng(cell_seed)
    if method == "IMM":
        tree = imm_fit(X, reference)
        ev = evaluate_tree(tree, X, reference)
        return ev.cost_ratio, {"leaves": tree.k}
    if method == "CART":
        tree, ev, _ = explain_with_cart(X, reference, use_coas=False, rng=rng)
        return ev.cost_ratio, {"leaves": tree.k, "shortfall": ev.leaf_shortfall}
    if method == "c_CART":
        tree, ev, res = explain_with_cart(X, reference, use_coas=True,
                                          budget_T=cfg.budget_T, rng=rng,
                                          ns_bounds=cfg.ns_bounds)
        aux = {"leaves": tree.k, "shortfall": ev.leaf_shortfall}
        aux.update(_params_aux(res))
        return ev.cost_ratio, aux
    raise ValueError(f"unknown expclust method '{method}'")


# ---------------------------------------------------------------------------
# Task 2: prototype classifiers (70/30 train/test per trial)
# ---------------------------------------------------------------------------


def _trial_split(cfg: ExperimentConfig, ds: Dataset, trial: int):
    ds = _effective_dataset(cfg, ds, trial)
    split_seed = derive_seed(cfg.seed, ds.name, "split", trial)
    parts = split(ds, (0.7, 0.0, 0.3), Rng(split_seed), stratified=True)
    X_tr, y_tr = ds.features[parts.train_idx], ds.labels[parts.train_idx]
    X_te, y_te = ds.features[parts.test_idx], ds.labels[parts.test_idx]
    if cfg.standardize:
        mean = X_tr.mean(axis=0)
        sd = X_tr.std(axis=0, ddof=0)
        scale = np.where(sd > 0, sd, 1.0)
        X_tr = (X_tr - mean) / scale
        X_te = (X_te - mean) / scale
    return X_tr, y_tr, X_te, y_te


def _grid_select(fit_one, gamma_grid, X_tr, y_tr, X_va, y_va, n_classes, predict):
    """Fit per bandwidth on the inner train, score on the inner val; ties
    prefer the smaller bandwidth."""
    best = None
    for g in gamma_grid:
        model = fit_one(X_tr, y_tr, g)
        score = f1_macro(y_va, predict(model, X_va), n_classes)
        if best is None or score > best[0]:
            best = (score, g)
    return best[1]


def _inner_70_30(X, y, rng: Rng):
    perm = rng.permutation(len(X))
    cut = max(1, min(len(X) - 1, int(round(len(X) * 0.7))))
    tr, va = perm[:cut], perm[cut:]
    return X[tr], y[tr], X[va], y[va]


def run_proto_cell(cfg: ExperimentConfig, ds: Dataset, size: NumPrototypes,
                   method: str, trial: int, cell_seed: int):
    X_tr, y_tr, X_te, y_te = _trial_split(cfg, ds, trial)
    n_classes = ds.n_classes
    n_p = size.n_p
    rng = Rng(cell_seed)

    if method == "KM_RBFN":
        model = km_rbfn_fit(X_tr, y_tr, n_p, cfg.gamma_grid, rng)
        return f1_macro(y_te, rbfn_predict(model, X_te), n_classes), {"gamma": model.gamma}

    if method == "c_RBFN":
        model, info = c_rbfn_fit(X_tr, y_tr, n_p, cfg.gamma_grid, cfg.budget_T,
                                 rng, strategy=cfg.strategy)
        aux = {"gamma": info["gamma"], "prototypes": len(model.prototypes)}
        if info["best_params"] is not None:
            aux.update({"n_s": info["best_params"].n_s, "p_o": round(info["best_params"].p_o, 6)})
        return f1_macro(y_te, rbfn_predict(model, X_te), n_classes), aux

    if method == "SNC":
        Xi, yi, Xv, yv = _inner_70_30(X_tr, y_tr, rng.spawn("inner"))
        np_eff = min(n_p, len(Xi))
        gamma = _grid_select(
            lambda A, b, g: snc_fit(A, b, np_eff, g, rng.spawn("grid", str(g)),
                                    n_classes=n_classes),
            cfg.gamma_grid, Xi, yi, Xv, yv, n_classes, snc_predict,
        )
        model = snc_fit(X_tr, y_tr, min(n_p, len(X_tr)), gamma, rng.spawn("final"),
                        n_classes=n_classes)
        return f1_macro(y_te, snc_predict(model, X_te), n_classes), {"gamma": gamma}

    if method == "ProtoNN":
        Xi, yi, Xv, yv = _inner_70_30(X_tr, y_tr, rng.spawn("inner"))
        gamma = _grid_select(
            lambda A, b, g: protonn_fit(A, b, n_p, g, rng.spawn("grid", str(g)),
                                        n_classes=n_classes),
            cfg.gamma_grid, Xi, yi, Xv, yv, n_classes, protonn_predict,
        )
        model = protonn_fit(X_tr, y_tr, n_p, gamma, rng.spawn("final"), n_classes=n_classes)
        return f1_macro(y_te, protonn_predict(model, X_te), n_classes), {"gamma": gamma}

    if method == "FCNN1":
        result = fcnn1_fit(X_tr, y_tr)
        chosen = result.subsets[0]
        for subset in result.subsets:
            if len(subset) <= n_p:
                chosen = subset
            else:
                break
        pred = one_nn_predict(X_tr[chosen], y_tr[chosen], X_te)
        aux = {"prototypes": len(chosen), "consistent": result.consistent}
        return f1_macro(y_te, pred, n_classes), aux

    raise ValueError(f"unknown proto method '{method}'")


# ---------------------------------------------------------------------------
# Task 3: size-constrained random forests (70/30 train/test per trial)
# ---------------------------------------------------------------------------


def run_rf_cell(cfg: ExperimentConfig, ds: Dataset, size: ForestShape,
                method: str, trial: int, cell_seed: int):
    X_tr, y_tr, X_te, y_te = _trial_split(cfg, ds, trial)
    n_classes = ds.n_classes
    rng = Rng(cell_seed)

    if method == "RF":
        forest = rf_fit(X_tr, y_tr, size.num_trees, size.max_depth,
                        class_weighting="balanced_subsample", rng=rng,
                        n_classes=n_classes)
        labels, _ = rf_predict(forest, X_te)
        return f1_macro(y_te, labels, n_classes), {}

    if method == "c_RF":
        Xi, yi, Xv, yv = _inner_70_30(X_tr, y_tr, rng.spawn("inner"))
        if cfg.ns_bounds is not None:
            ns_bounds = cfg.ns_bounds
        else:
            lo = min(RF_NS_LOWER, max(2, len(Xi) // 2))
            ns_bounds = (lo, len(Xi))
        counter = {"i": 0}

        def train(Xs, ys):
            i = counter["i"]
            counter["i"] += 1
            return rf_fit(Xs, ys, size.num_trees, size.max_depth,
                          class_weighting="none", rng=rng.spawn("rf", i),
                          n_classes=n_classes)

        def metric(model, X_val, y_val):
            labels, _ = rf_predict(model, X_val)
            return f1_macro(y_val, labels, n_classes)

        result = coas.optimize(train, metric, Xi, yi, Xv, yv, budget_T=cfg.budget_T,
                               ns_bounds=ns_bounds, rng=rng.spawn("coas"),
                               strategy=cfg.strategy)
        model = result.best_model
        if model is None:
            model = rf_fit(Xi, yi, size.num_trees, size.max_depth,
                           class_weighting="none", rng=rng.spawn("fallback"),
                           n_classes=n_classes)
        labels, _ = rf_predict(model, X_te)
        return f1_macro(y_te, labels, n_classes), _params_aux(result)

    if method in ("OTE", "subforest"):
        Xi, yi, Xv, yv = _inner_70_30(X_tr, y_tr, rng.spawn("inner"))
        forest = rf_fit(Xi, yi, OTE_INITIAL_TREES, size.max_depth,
                        class_weighting="balanced_subsample", rng=rng.spawn("forest"),
                        n_classes=n_classes)
        if method == "OTE":
            pruned = ote_prune(forest, Xi, yi, Xv, yv,
                               PruneConfig(target_trees=size.num_trees))
        else:
            pruned = subforest_prune(forest, Xv, yv, size.num_trees)
        labels, _ = rf_predict(pruned, X_te)
        return f1_macro(y_te, labels, n_classes), {"pruned_from": OTE_INITIAL_TREES}

    raise ValueError(f"unknown rf method '{method}'")


CELL_RUNNERS = {
    "expclust": run_expclust_cell,
    "proto": run_proto_cell,
    "rf": run_rf_cell,
}
