"""Prototype-based classifiers: fast condensed nearest-neighbor subsets
(FCNN1), stochastic neighbor compression (gradient-refined prototypes with
frozen labels, 1-NN prediction), ProtoNN-style score-matrix aggregation, and
RBF networks whose prototypes come either from k-means or from adaptively
sampled training instances.

Kernel bandwidths are selected from a fixed grid by validation F1 where a
grid is accepted; ties prefer the smaller bandwidth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import coas
from .data import _largest_remainder_counts
from .evalstats import f1_macro
from .learners import kmeans_fit
from .numerics import Rng, rbf_kernel_matrix, ridge_least_squares, sq_distances

GAMMA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)

_EPS = 1e-300


# ---------------------------------------------------------------------------
# FCNN1
# ---------------------------------------------------------------------------


@dataclass
class Fcnn1Result:
    subsets: list[np.ndarray]  # nested index subsets V_1 c V_2 c ...
    consistent: bool


def _nearest_in(X, subset: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Index (into `subset`) of each query's nearest prototype; ties go to the
    lowest training index because subsets are kept sorted."""
    d2 = sq_distances(X[queries], X[subset])
    return np.argmin(d2, axis=1)


def fcnn1_fit(X, y) -> Fcnn1Result:
    """Expanding consistent-subset selection: seed with each class's
    centroid-nearest instance, then per iteration add, for every prototype's
    Voronoi cell, the misclassified point nearest to that prototype. Stops
    when 1-NN over the subset classifies all of X correctly, or flags
    non-consistency when conflicting duplicates make that impossible."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(X)
    classes = np.unique(y)

    seeds = []
    for c in classes:
        idx_c = np.nonzero(y == c)[0]
        centroid = X[idx_c].mean(axis=0)
        d2 = ((X[idx_c] - centroid) ** 2).sum(axis=1)
        seeds.append(int(idx_c[int(np.argmin(d2))]))
    subset = np.array(sorted(set(seeds)), dtype=np.int64)

    subsets = [subset.copy()]
    for _ in range(n):
        everyone = np.arange(n)
        nn_pos = _nearest_in(X, subset, everyone)
        nn_label = y[subset[nn_pos]]
        wrong = np.nonzero(nn_label != y)[0]
        if len(wrong) == 0:
            return Fcnn1Result(subsets=subsets, consistent=True)
        additions = set()
        for p_pos in np.unique(nn_pos[wrong]):
            cell = wrong[nn_pos[wrong] == p_pos]
            d2 = ((X[cell] - X[subset[p_pos]]) ** 2).sum(axis=1)
            additions.add(int(cell[int(np.argmin(d2))]))
        additions -= set(subset.tolist())
        if not additions:  # conflicting duplicates: consistency unreachable
            return Fcnn1Result(subsets=subsets, consistent=False)
        subset = np.array(sorted(set(subset.tolist()) | additions), dtype=np.int64)
        subsets.append(subset.copy())
    return Fcnn1Result(subsets=subsets, consistent=len(subsets[-1]) == n)


def one_nn_predict(X_ref, y_ref, X_query) -> np.ndarray:
    d2 = sq_distances(np.asarray(X_query, dtype=np.float64), np.asarray(X_ref, dtype=np.float64))
    return np.asarray(y_ref)[np.argmin(d2, axis=1)]


# ---------------------------------------------------------------------------
# Stochastic neighbor compression
# ---------------------------------------------------------------------------


@dataclass
class SncModel:
    prototypes: np.ndarray
    proto_labels: np.ndarray
    gamma: float
    loss_trace: list[float] = field(default_factory=list)


def _stratified_allocation(y, n_p, n_classes):
    counts = np.bincount(y, minlength=n_classes)
    alloc = _largest_remainder_counts(n_p, counts / counts.sum())
    if n_p >= (counts > 0).sum():
        # every present class keeps at least one slot
        for c in range(n_classes):
            if counts[c] > 0 and alloc[c] == 0:
                donor = int(np.argmax(alloc))
                alloc[donor] -= 1
                alloc[c] = 1
    return [min(a, int(counts[c])) for c, a in enumerate(alloc)]


def _stratified_subset(y, n_p, n_classes, rng: Rng) -> np.ndarray:
    alloc = _stratified_allocation(y, n_p, n_classes)
    picked = []
    for c, a in enumerate(alloc):
        if a == 0:
            continue
        idx_c = np.nonzero(y == c)[0]
        picked.append(idx_c[rng.permutation(len(idx_c))[:a]])
    return np.sort(np.concatenate(picked))


def snc_loss_grad(X, y, P, proto_labels, gamma):
    """Soft 1-NN negative log-likelihood and its gradient w.r.t. prototype
    coordinates: L = -sum_i log( sum_{j: l_j=y_i} K_ij / sum_j K_ij )."""
    K = rbf_kernel_matrix(X, P, gamma)
    same = (np.asarray(proto_labels)[None, :] == np.asarray(y)[:, None]).astype(np.float64)
    den = np.maximum(K.sum(axis=1), _EPS)
    num = np.maximum((K * same).sum(axis=1), _EPS)
    loss = float((np.log(den) - np.log(num)).sum())
    A = (same / num[:, None] - 1.0 / den[:, None]) * K
    col = A.sum(axis=0)
    grad = -2.0 * gamma * (A.T @ X - col[:, None] * P)
    return loss, grad


ARMIJO_C = 1e-4


def snc_fit(X, y, n_p: int, gamma: float, rng: Rng, max_iters: int = 100,
            max_backtrack: int = 50, n_classes: int | None = None,
            initial_step: float = 1.0, armijo_c: float = ARMIJO_C) -> SncModel:
    """Initialize prototypes as a random label-stratified training subset and
    refine their coordinates by full-batch gradient descent with Armijo
    backtracking (halving from `initial_step`). Labels stay frozen."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_p > len(X):
        raise ValueError("n_p must not exceed the training size")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    idx = _stratified_subset(y, n_p, n_classes, rng)
    P = X[idx].copy()
    labels = y[idx].copy()

    loss, grad = snc_loss_grad(X, y, P, labels, gamma)
    trace = [loss]
    for _ in range(max_iters):
        g2 = float((grad**2).sum())
        if g2 == 0.0:
            break
        step = initial_step
        accepted = False
        for _bt in range(max_backtrack):
            cand = P - step * grad
            cand_loss, cand_grad = snc_loss_grad(X, y, cand, labels, gamma)
            if cand_loss <= loss - armijo_c * step * g2:
                P, loss, grad = cand, cand_loss, cand_grad
                trace.append(loss)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return SncModel(prototypes=P, proto_labels=labels, gamma=gamma, loss_trace=trace)


def snc_predict(m: SncModel, X) -> np.ndarray:
    """1-NN over the prototypes; ties go to the lowest prototype index."""
    d2 = sq_distances(np.asarray(X, dtype=np.float64), m.prototypes)
    return m.proto_labels[np.argmin(d2, axis=1)]


# ---------------------------------------------------------------------------
# ProtoNN-style score aggregation
# ---------------------------------------------------------------------------


@dataclass
class ProtoNNModel:
    prototypes: np.ndarray  # (N_p, D)
    scores: np.ndarray      # (C, N_p)
    gamma: float
    loss_trace: list[float] = field(default_factory=list)


def protonn_loss_grad(X, y_onehot, B, Z, gamma):
    """Mean squared error between one-hot labels and kernel-aggregated score
    vectors, with gradients w.r.t. prototypes B and score matrix Z."""
    n = len(X)
    K = rbf_kernel_matrix(X, B, gamma)      # (N, N_p)
    S = K @ Z.T                              # (N, C)
    E = S - y_onehot                         # (N, C)
    loss = float((E**2).sum() / n)
    grad_Z = 2.0 / n * (E.T @ K)
    G = (E @ Z) * K                          # (N, N_p)
    grad_B = 4.0 * gamma / n * (G.T @ X - G.sum(axis=0)[:, None] * B)
    return loss, grad_B, grad_Z


_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


def protonn_fit(X, y, n_p: int, gamma: float, rng: Rng, epochs: int = 200,
                learning_rate: float = 0.05, n_classes: int | None = None) -> ProtoNNModel:
    """Prototypes start at label-stratified k-means centers, scores at
    per-class indicators scaled by 1/N_p; both are trained by full-batch
    adaptive-moment gradient descent on the squared score error. Returns the
    best-training-loss iterate."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if n_p < n_classes:
        raise ValueError("n_p must be at least the number of classes")
    alloc = _stratified_allocation(y, n_p, n_classes)
    bs, zs = [], []
    for c, a in enumerate(alloc):
        if a == 0:
            continue
        idx_c = np.nonzero(y == c)[0]
        km = kmeans_fit(X[idx_c], min(a, len(idx_c)), rng.spawn("init", c), n_restarts=3)
        bs.append(km.centroids)
        z = np.zeros((n_classes, len(km.centroids)))
        z[c] = 1.0 / n_p
        zs.append(z)
    B = np.vstack(bs)
    Z = np.hstack(zs)
    y_onehot = np.eye(n_classes)[y]

    mB = np.zeros_like(B); vB = np.zeros_like(B)
    mZ = np.zeros_like(Z); vZ = np.zeros_like(Z)
    loss, gB, gZ = protonn_loss_grad(X, y_onehot, B, Z, gamma)
    best = (loss, B.copy(), Z.copy())
    trace = [loss]
    for t in range(1, epochs + 1):
        mB = _ADAM_B1 * mB + (1 - _ADAM_B1) * gB
        vB = _ADAM_B2 * vB + (1 - _ADAM_B2) * gB**2
        mZ = _ADAM_B1 * mZ + (1 - _ADAM_B1) * gZ
        vZ = _ADAM_B2 * vZ + (1 - _ADAM_B2) * gZ**2
        bc1 = 1 - _ADAM_B1**t
        bc2 = 1 - _ADAM_B2**t
        B = B - learning_rate * (mB / bc1) / (np.sqrt(vB / bc2) + _ADAM_EPS)
        Z = Z - learning_rate * (mZ / bc1) / (np.sqrt(vZ / bc2) + _ADAM_EPS)
        loss, gB, gZ = protonn_loss_grad(X, y_onehot, B, Z, gamma)
        trace.append(loss)
        if loss < best[0]:
            best = (loss, B.copy(), Z.copy())
    return ProtoNNModel(prototypes=best[1], scores=best[2], gamma=gamma, loss_trace=trace)


def protonn_predict(m: ProtoNNModel, X) -> np.ndarray:
    K = rbf_kernel_matrix(np.asarray(X, dtype=np.float64), m.prototypes, m.gamma)
    scores = K @ m.scores.T
    return np.argmax(scores, axis=1)


# ---------------------------------------------------------------------------
# RBF networks
# ---------------------------------------------------------------------------


@dataclass
class RbfnModel:
    prototypes: np.ndarray
    gamma: float
    weights: np.ndarray  # (C, N_p), one-vs-rest
    ridge: float
    n_classes: int


def rbfn_fit(X, y, prototypes, gamma: float, ridge: float = 1e-8,
             n_classes: int | None = None) -> RbfnModel:
    """One-vs-rest +-1 targets regressed on the kernel design matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    K = rbf_kernel_matrix(X, prototypes, gamma)
    targets = np.where(np.arange(n_classes)[None, :] == y[:, None], 1.0, -1.0)
    W = ridge_least_squares(K, targets, ridge)  # (N_p, C)
    return RbfnModel(prototypes=prototypes, gamma=gamma, weights=W.T,
                     ridge=ridge, n_classes=n_classes)


def rbfn_predict(m: RbfnModel, X) -> np.ndarray:
    K = rbf_kernel_matrix(np.asarray(X, dtype=np.float64), m.prototypes, m.gamma)
    scores = K @ m.weights.T
    return np.argmax(scores, axis=1)


def _inner_split(n: int, rng: Rng):
    perm = rng.permutation(n)
    cut = max(1, int(round(n * 0.7)))
    if cut >= n:
        cut = n - 1
    return perm[:cut], perm[cut:]


def km_rbfn_fit(X, y, n_p: int, gamma_grid=GAMMA_GRID, rng: Rng | None = None,
                ridge: float = 1e-8):
    """k-means centers as prototypes. The kernel bandwidth is picked on an
    internal 70/30 split by validation F1, then the model is refit on all of
    the supplied data with the winning bandwidth."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if rng is None:
        rng = Rng(0)
    n_classes = int(y.max()) + 1
    tr, va = _inner_split(len(X), rng.spawn("split"))
    protos_inner = kmeans_fit(X[tr], min(n_p, len(tr)), rng.spawn("km_inner")).centroids
    best = None
    for g in gamma_grid:
        model = rbfn_fit(X[tr], y[tr], protos_inner, g, ridge, n_classes)
        score = f1_macro(y[va], rbfn_predict(model, X[va]), n_classes)
        if best is None or score > best[0]:
            best = (score, g)
    gamma = best[1]
    protos = kmeans_fit(X, min(n_p, len(X)), rng.spawn("km_full")).centroids
    return rbfn_fit(X, y, protos, gamma, ridge, n_classes)


def c_rbfn_fit(X, y, n_p: int, gamma_grid=GAMMA_GRID, budget_T: int = 1000,
               rng: Rng | None = None, ridge: float = 1e-8, strategy: str = "gp"):
    """Prototypes sampled from the training data by adaptive sampling: for
    each grid bandwidth, a full optimization run with sample-size bounds
    (N_p - 1, N_p) selects the prototype subset maximizing validation F1.
    The winning iterate's prototype set is kept as-is; only the deterministic
    ridge head is refit on all supplied data (mirroring the k-means variant's
    refit protocol).

    Returns (model, info dict with gamma / validation score / history).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_p < 2:
        raise ValueError("n_p must be >= 2 so the sample-size bounds differ")
    if rng is None:
        rng = Rng(0)
    n_classes = int(y.max()) + 1
    tr, va = _inner_split(len(X), rng.spawn("split"))
    X_tr, y_tr, X_va, y_va = X[tr], y[tr], X[va], y[va]
    scores = coas.oracle_scores(X_tr, y_tr, rng.spawn("oracle"))

    best = None
    for g in gamma_grid:
        def train(Xs, ys, _g=g):
            return rbfn_fit(X_tr, y_tr, prototypes=Xs, gamma=_g, ridge=ridge,
                            n_classes=n_classes)

        def metric(model, X_val, y_val):
            return f1_macro(y_val, rbfn_predict(model, X_val), n_classes)

        result = coas.optimize(train, metric, X_tr, y_tr, X_va, y_va,
                               budget_T=budget_T, ns_bounds=(n_p - 1, n_p),
                               rng=rng.spawn("coas", str(g)), scores=scores,
                               strategy=strategy)
        if best is None or result.best_val_score > best[0]:
            best = (result.best_val_score, g, result)
    _, gamma, result = best
    info = {"gamma": gamma, "val_f1": result.best_val_score,
            "best_params": result.best_params, "history": result.history}
    model = rbfn_fit(X, y, prototypes=result.best_model.prototypes, gamma=gamma,
                     ridge=ridge, n_classes=n_classes)
    return model, info
