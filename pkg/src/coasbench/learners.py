"""Size-constrained base learners built from scratch: CART classification
trees (best-first growth under a leaf budget), Lloyd's k-means, and random
forests with out-of-bag bookkeeping.

Everything is deterministic given (data, parameters, seed); models are
immutable after fitting.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .numerics import Rng, sq_distances


@dataclass
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (distribution,
    label). Routing sends x left iff x[feature] <= threshold."""

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    class_distribution: np.ndarray | None = None
    label: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class CartModel:
    root: TreeNode
    max_leaves: int
    class_weights: np.ndarray
    n_classes: int
    n_features: int

    def leaves(self) -> list[TreeNode]:
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend([node.right, node.left])
        return out

    def depth(self) -> int:
        def go(node, d):
            if node.is_leaf:
                return d
            return max(go(node.left, d + 1), go(node.right, d + 1))

        return go(self.root, 0)


@dataclass
class ClusteringModel:
    centroids: np.ndarray
    assignments: np.ndarray
    cost: float
    k: int


@dataclass
class Forest:
    trees: list[CartModel]
    oob_masks: np.ndarray  # (num_trees, N) bool; True = instance absent from bootstrap
    num_trees: int
    max_depth: int
    n_classes: int
    n_features: int


# ---------------------------------------------------------------------------
# CART
# ---------------------------------------------------------------------------


def class_weight_vector(y: np.ndarray, n_classes: int, scheme: str) -> np.ndarray:
    """'balanced' gives class c the weight N / (C * N_c); 'none' gives 1."""
    if scheme == "none":
        return np.ones(n_classes)
    if scheme != "balanced":
        raise ValueError(f"unknown class weighting '{scheme}'")
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    w = np.zeros(n_classes)
    present = counts > 0
    w[present] = len(y) / (n_classes * counts[present])
    return w


def _gini_sum(wcounts: np.ndarray) -> np.ndarray:
    """Weighted Gini impurity mass w_total * (1 - sum_c p_c^2), vectorized
    over rows of class-weight counts."""
    totals = wcounts.sum(axis=-1)
    safe = np.where(totals > 0, totals, 1.0)
    return totals - (wcounts**2).sum(axis=-1) / safe


def _best_split(X, y, w, idx, n_classes, features):
    """Best (gain, feature, threshold) over candidate midpoints of the given
    features; returns gain -inf when no strict-improvement split exists."""
    sub_y = y[idx]
    sub_w = w[idx]
    total = np.zeros(n_classes)
    np.add.at(total, sub_y, sub_w)
    parent = float(_gini_sum(total))
    if parent <= 0.0:
        return -math.inf, -1, 0.0
    best_gain, best_feat, best_thr = -math.inf, -1, 0.0
    one_hot = np.zeros((len(idx), n_classes))
    one_hot[np.arange(len(idx)), sub_y] = sub_w
    for j in features:
        vals = X[idx, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cuts = np.nonzero(sv[:-1] < sv[1:])[0]
        if len(cuts) == 0:
            continue
        prefix = np.cumsum(one_hot[order], axis=0)
        left = prefix[cuts]
        right = total[None, :] - left
        child = _gini_sum(left) + _gini_sum(right)
        gains = parent - child
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain > 0.0 and gain > best_gain:
            a, b = sv[cuts[pos]], sv[cuts[pos] + 1]
            thr = (a + b) / 2.0
            if thr >= b:  # midpoint rounded up to b: fall back so b routes right
                thr = a
            best_gain, best_feat, best_thr = gain, int(j), float(thr)
    return best_gain, best_feat, best_thr


def _make_leaf(y, w, idx, n_classes) -> TreeNode:
    counts = np.zeros(n_classes)
    np.add.at(counts, y[idx], w[idx])
    total = counts.sum()
    dist = counts / total if total > 0 else np.full(n_classes, 1.0 / n_classes)
    return TreeNode(class_distribution=dist, label=int(np.argmax(dist)))


def _grow_tree(X, y, w, n_classes, max_leaves, max_depth, max_features, rng: Rng | None):
    """Best-first growth: repeatedly split the leaf with the largest weighted
    impurity decrease. Ties go to the earliest-created leaf. A node only
    splits on a strict decrease, within the depth cap, searching either all
    features or a per-node random subset of `max_features`."""
    n, d = X.shape

    def candidate_features():
        if max_features is None or max_features >= d:
            return range(d)
        return np.sort(rng.permutation(d)[:max_features])

    root = _make_leaf(y, w, np.arange(n), n_classes)
    heap: list = []
    counter = 0

    def consider(node, idx, depth):
        nonlocal counter
        if max_depth is not None and depth >= max_depth:
            return
        gain, feat, thr = _best_split(X, y, w, idx, n_classes, candidate_features())
        if gain > 0.0:
            heapq.heappush(heap, (-gain, counter, node, idx, depth, feat, thr))
            counter += 1

    consider(root, np.arange(n), 0)
    n_leaves = 1
    while heap and (max_leaves is None or n_leaves < max_leaves):
        _, _, node, idx, depth, feat, thr = heapq.heappop(heap)
        mask = X[idx, feat] <= thr
        left_idx, right_idx = idx[mask], idx[~mask]
        node.feature = feat
        node.threshold = thr
        node.class_distribution = None
        node.label = None
        node.left = _make_leaf(y, w, left_idx, n_classes)
        node.right = _make_leaf(y, w, right_idx, n_classes)
        n_leaves += 1
        consider(node.left, left_idx, depth + 1)
        consider(node.right, right_idx, depth + 1)
    return root


def cart_fit(
    X,
    y,
    max_leaves: int,
    class_weighting: str = "none",
    rng: Rng | None = None,
    n_classes: int | None = None,
    max_depth: int | None = None,
) -> CartModel:
    """Gini CART capped at `max_leaves` leaves (max_leaves=1 is the weighted
    majority predictor). Candidate thresholds are midpoints of consecutive
    distinct sorted feature values."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    cw = class_weight_vector(y, n_classes, class_weighting)
    w = cw[y]
    root = _grow_tree(X, y, w, n_classes, max_leaves, max_depth, None, rng)
    return CartModel(root=root, max_leaves=max_leaves, class_weights=cw,
                     n_classes=n_classes, n_features=X.shape[1])


def tree_to_text(m: CartModel) -> str:
    """Indented structured-text dump of a fitted tree (debugging aid)."""
    lines: list[str] = []

    def go(node, depth):
        pad = "  " * depth
        if node.is_leaf:
            dist = ", ".join(f"{v:.4g}" for v in node.class_distribution)
            lines.append(f"{pad}leaf label={node.label} dist=[{dist}]")
        else:
            lines.append(f"{pad}if x[{node.feature}] <= {node.threshold:.17g}:")
            go(node.left, depth + 1)
            lines.append(f"{pad}else:")
            go(node.right, depth + 1)

    go(m.root, 0)
    return "\n".join(lines)


def forest_to_text(f: Forest) -> str:
    parts = []
    for i, tree in enumerate(f.trees):
        parts.append(f"tree {i} (oob={int(f.oob_masks[i].sum())}):")
        parts.append(tree_to_text(tree))
    return "\n".join(parts)


def cart_leaf_assignments(m: CartModel, X) -> np.ndarray:
    """Index of the leaf each row routes to (leaves numbered left-to-right)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != m.n_features:
        raise ValueError("feature count mismatch")
    out = np.empty(len(X), dtype=np.int64)
    leaf_no = 0

    def walk(node, rows):
        nonlocal leaf_no
        if node.is_leaf:
            out[rows] = leaf_no
            leaf_no += 1
            return
        mask = X[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(m.root, np.arange(len(X)))
    return out


def cart_predict_proba(m: CartModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise ValueError("feature count mismatch")
    out = np.empty((len(X), m.n_classes))

    def walk(node, rows):
        if len(rows) == 0:
            return
        if node.is_leaf:
            out[rows] = node.class_distribution
            return
        mask = X[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(m.root, np.arange(len(X)))
    return out


def cart_predict(m: CartModel, X) -> np.ndarray:
    return np.argmax(cart_predict_proba(m, X), axis=1)


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------


def _kmeanspp_init(X, k, rng: Rng) -> np.ndarray:
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(0, n)]
    min_d2 = sq_distances(X, centers[:1]).ravel()
    for j in range(1, k):
        total = min_d2.sum()
        if total > 0:
            pick = int(rng.choice(n, size=1, p=min_d2 / total)[0])
        else:
            pick = rng.integers(0, n)
        centers[j] = X[pick]
        min_d2 = np.minimum(min_d2, sq_distances(X, centers[j : j + 1]).ravel())
    return centers


def _lloyd(X, k, rng: Rng, max_iter: int):
    n = len(X)
    centers = _kmeanspp_init(X, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = sq_distances(X, centers)
        new_assign = np.argmin(d2, axis=1)
        # refill empty clusters with the point farthest from its centroid
        for j in range(k):
            if not (new_assign == j).any():
                far = int(np.argmax(d2[np.arange(n), new_assign]))
                centers[j] = X[far]
                d2[:, j] = sq_distances(X, centers[j : j + 1]).ravel()
                new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = X[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    d2 = sq_distances(X, centers)
    assign = np.argmin(d2, axis=1)
    cost = float(d2[np.arange(n), assign].mean())
    return centers, assign, cost


def kmeans_fit(X, k: int, rng: Rng, n_restarts: int = 10, max_iter: int = 100) -> ClusteringModel:
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding. The cost is
    the mean squared distance of points to their assigned centroid."""
    X = np.asarray(X, dtype=np.float64)
    if k < 1 or k > len(X):
        raise ValueError(f"k must be in [1, {len(X)}]")
    best = None
    for r in range(n_restarts):
        centers, assign, cost = _lloyd(X, k, rng.spawn("restart", r), max_iter)
        if best is None or cost < best[2]:
            best = (centers, assign, cost)
    return ClusteringModel(centroids=best[0], assignments=best[1], cost=best[2], k=k)


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


def rf_fit(
    X,
    y,
    num_trees: int,
    max_depth: int | None,
    class_weighting: str = "balanced_subsample",
    rng: Rng | None = None,
    n_classes: int | None = None,
) -> Forest:
    """Bagged depth-capped Gini trees with per-split feature subsets of size
    ceil(sqrt(D)). 'balanced_subsample' recomputes class weights inside each
    bootstrap; out-of-bag masks are recorded per tree."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if class_weighting not in ("balanced_subsample", "none"):
        raise ValueError(f"unknown class weighting '{class_weighting}'")
    if rng is None:
        rng = Rng(0)
    n, d = X.shape
    if n_classes is None:
        n_classes = int(y.max()) + 1
    max_features = math.ceil(math.sqrt(d))
    trees: list[CartModel] = []
    oob = np.zeros((num_trees, n), dtype=bool)
    for t in range(num_trees):
        child = rng.spawn("tree", t)
        boot = np.asarray(child.integers(0, n, size=n))
        oob[t] = ~np.isin(np.arange(n), boot)
        yb = y[boot]
        scheme = "balanced" if class_weighting == "balanced_subsample" else "none"
        cw = class_weight_vector(yb, n_classes, scheme)
        root = _grow_tree(X[boot], yb, cw[yb], n_classes, None, max_depth, max_features, child)
        trees.append(CartModel(root=root, max_leaves=2**31, class_weights=cw,
                               n_classes=n_classes, n_features=d))
    return Forest(trees=trees, oob_masks=oob, num_trees=num_trees,
                  max_depth=max_depth if max_depth is not None else -1,
                  n_classes=n_classes, n_features=d)


def forest_predict_proba(trees: list[CartModel], X) -> np.ndarray:
    """Average of per-tree leaf class distributions."""
    if not trees:
        raise ValueError("empty tree list")
    acc = cart_predict_proba(trees[0], X).copy()
    for t in trees[1:]:
        acc += cart_predict_proba(t, X)
    return acc / len(trees)


def rf_predict(f: Forest, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels (argmax of averaged distributions, ties to the lowest id) plus
    the class-probability matrix."""
    proba = forest_predict_proba(f.trees, X)
    return np.argmax(proba, axis=1), proba
