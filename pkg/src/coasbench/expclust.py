"""Explainable clustering: the clustering cost and cost ratio, mistake-
minimizing explanation trees (one leaf per reference cluster), and CART as a
cluster explainer with optional adaptive-sampling wrapping.

The cost of a tree explanation is the clustering cost of its leaf partition
with each leaf's centroid at the mean of the points routed to it, so any
k-leaf tree is lower-bounded by the optimal k-partition cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coas
from .evalstats import f1_macro
from .learners import CartModel, ClusteringModel, TreeNode, cart_fit, cart_predict
from .numerics import Rng


@dataclass
class ExplanationTree:
    root: TreeNode
    k: int                       # number of leaves
    leaf_centroids: np.ndarray   # (k, D), mean of routed points per leaf
    leaf_cluster_ids: list[int]  # reference cluster represented by each leaf


@dataclass
class ClusteringEval:
    j_ex: float
    j_km: float
    cost_ratio: float
    leaf_shortfall: bool = False  # tree produced fewer leaves than clusters


def clustering_cost(X, assignments, centroids) -> float:
    """Mean squared distance of every point to its assigned centroid."""
    X = np.asarray(X, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if assignments.min() < 0 or assignments.max() >= len(centroids):
        raise ValueError("assignment out of centroid range")
    diff = X - centroids[assignments]
    return float((diff**2).sum() / len(X))


def cost_ratio(j_ex: float, j_km: float) -> float:
    if j_km < 0 or j_ex < 0:
        raise ValueError("costs must be nonnegative")
    if j_km == 0.0:
        if j_ex == 0.0:
            return 1.0
        raise ValueError("reference clustering cost is zero but tree cost is not")
    return j_ex / j_km


# ---------------------------------------------------------------------------
# Mistake-minimizing explanation tree
# ---------------------------------------------------------------------------


def _center_split_candidates(centers: np.ndarray):
    """(feature, threshold) pairs at midpoints between consecutive distinct
    center coordinates; every candidate separates at least one center pair."""
    for j in range(centers.shape[1]):
        vals = np.unique(centers[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            yield j, (a + b) / 2.0


def imm_fit(X, reference: ClusteringModel) -> ExplanationTree:
    """Greedy top-down tree: each split minimizes the number of points routed
    to the opposite side of their assigned reference center (ties: lowest
    mistakes, feature, threshold); mistaken points are dropped below the
    split. Recursion ends with exactly one center, hence exactly k leaves."""
    X = np.asarray(X, dtype=np.float64)
    centers = reference.centroids
    assign = np.asarray(reference.assignments, dtype=np.int64)
    if reference.k < 1:
        raise ValueError("reference must have at least one center")

    def build(point_idx: np.ndarray, center_ids: np.ndarray) -> TreeNode:
        if len(center_ids) == 1:
            return TreeNode(class_distribution=None, label=int(center_ids[0]))
        sub_centers = centers[center_ids]
        best = None
        for j, thr in _center_split_candidates(sub_centers):
            centers_left = center_ids[sub_centers[:, j] <= thr]
            left_set = set(centers_left.tolist())
            pts_left_side = X[point_idx, j] <= thr
            ctr_left_side = np.array([assign[i] in left_set for i in point_idx])
            mistakes = int((pts_left_side != ctr_left_side).sum())
            if best is None or mistakes < best[0]:
                best = (mistakes, j, thr)
        if best is None:
            raise ValueError(
                "reference centers coincide on every feature; they cannot be "
                "separated by axis-aligned splits"
            )
        _, j, thr = best
        centers_mask = centers[center_ids, j] <= thr
        pts_side = X[point_idx, j] <= thr
        left_set = set(center_ids[centers_mask].tolist())
        ctr_side = np.array([assign[i] in left_set for i in point_idx])
        keep = pts_side == ctr_side  # survivors; mistakes dropped below
        left_node = build(point_idx[keep & pts_side], center_ids[centers_mask])
        right_node = build(point_idx[keep & ~pts_side], center_ids[~centers_mask])
        return TreeNode(feature=j, threshold=thr, left=left_node, right=right_node)

    root = build(np.arange(len(X)), np.arange(reference.k))
    return _finish_tree(root, X, assign, centers)


def _route_to_leaves(root: TreeNode, X: np.ndarray):
    """Leaf list in left-to-right order plus each row's leaf index."""
    leaves: list[TreeNode] = []
    leaf_of_point = np.empty(len(X), dtype=np.int64)

    def walk(node, rows):
        if node.is_leaf:
            leaf_of_point[rows] = len(leaves)
            leaves.append(node)
            return
        mask = X[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(root, np.arange(len(X)))
    return leaves, leaf_of_point


def _finish_tree(root: TreeNode, X, assign, ref_centroids) -> ExplanationTree:
    """Compute routed-point mean centroids per leaf. An empty leaf takes the
    reference centroid of the majority cluster in the nearest nonempty
    ancestor region (it holds no points, so it adds no cost)."""
    leaves, leaf_of_point = _route_to_leaves(root, X)
    k = len(leaves)
    dim = X.shape[1]
    centroids = np.zeros((k, dim))
    cluster_ids = []
    for i, leaf in enumerate(leaves):
        rows = np.nonzero(leaf_of_point == i)[0]
        if len(rows):
            centroids[i] = X[rows].mean(axis=0)
            majority = int(np.bincount(assign[rows]).argmax())
        else:
            majority = _majority_near_leaf(root, X, assign, i)
            centroids[i] = ref_centroids[majority]
        cluster_ids.append(int(leaf.label) if leaf.label is not None else majority)
    return ExplanationTree(root=root, k=k, leaf_centroids=centroids,
                           leaf_cluster_ids=cluster_ids)


def _majority_near_leaf(root: TreeNode, X, assign, leaf_index: int) -> int:
    """Majority reference cluster among points of the closest enclosing
    region that is nonempty (walks up from the leaf)."""
    path: list[TreeNode] = []

    def find(node, count):
        if node.is_leaf:
            if count[0] == leaf_index:
                path.append(node)
            count[0] += 1
            return bool(path)
        for child in (node.left, node.right):
            if find(child, count):
                if not path or path[-1] is not node:
                    path.append(node)
                return True
        return False

    find(root, [0])
    # route points through ancestors from the innermost outwards
    for ancestor in path[1:]:
        rows = _region_rows(root, ancestor, X)
        if len(rows):
            return int(np.bincount(assign[rows]).argmax())
    return int(np.bincount(assign).argmax())


def _region_rows(root: TreeNode, target: TreeNode, X) -> np.ndarray:
    rows = np.arange(len(X))
    node = root
    while node is not target:
        mask = X[rows, node.feature] <= node.threshold
        # descend toward the subtree containing target
        if _contains(node.left, target):
            rows, node = rows[mask], node.left
        else:
            rows, node = rows[~mask], node.right
    return rows


def _contains(node: TreeNode, target: TreeNode) -> bool:
    if node is target:
        return True
    if node.is_leaf:
        return False
    return _contains(node.left, target) or _contains(node.right, target)


# ---------------------------------------------------------------------------
# CART as an explainer
# ---------------------------------------------------------------------------


def evaluate_tree(tree: ExplanationTree, X, reference: ClusteringModel) -> ClusteringEval:
    _, leaf_of_point = _route_to_leaves(tree.root, np.asarray(X, dtype=np.float64))
    j_ex = clustering_cost(X, leaf_of_point, tree.leaf_centroids)
    return ClusteringEval(
        j_ex=j_ex,
        j_km=reference.cost,
        cost_ratio=cost_ratio(j_ex, reference.cost),
        leaf_shortfall=tree.k < reference.k,
    )


def explain_with_cart(
    X,
    reference: ClusteringModel,
    use_coas: bool = False,
    budget_T: int = 2000,
    rng: Rng | None = None,
    ns_bounds: tuple[int, int] | None = None,
    instrument=None,
):
    """Train CART on the reference cluster labels (max k leaves, balanced
    class weights) and evaluate it as an explanation tree. With `use_coas`
    the training set is adaptively sampled, scored by F1-macro against the
    cluster labels with train = val = the full dataset.

    Returns (ExplanationTree, ClusteringEval, CoasResult-or-None).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(reference.assignments, dtype=np.int64)
    k = reference.k
    if rng is None:
        rng = Rng(0)

    def train(Xs, ys):
        return cart_fit(Xs, ys, max_leaves=k, class_weighting="balanced", n_classes=k)

    coas_result = None
    if use_coas:
        if ns_bounds is None:
            n = len(X)
            ns_bounds = (400, n) if n > 400 else (max(2, n // 2), n)

        def metric(model, X_val, y_val):
            return f1_macro(y_val, cart_predict(model, X_val), k)

        coas_result = coas.optimize(train, metric, X, labels, X, labels,
                                    budget_T=budget_T, ns_bounds=ns_bounds,
                                    rng=rng, instrument=instrument)
        model = coas_result.best_model
        if model is None:  # every trial failed; fall back to the plain fit
            model = train(X, labels)
    else:
        model = train(X, labels)

    tree = _cart_to_explanation(model, X, labels, reference)
    return tree, evaluate_tree(tree, X, reference), coas_result


def _cart_to_explanation(model: CartModel, X, labels, reference: ClusteringModel) -> ExplanationTree:
    return _finish_tree(model.root, np.asarray(X, dtype=np.float64),
                        np.asarray(labels, dtype=np.int64), reference.centroids)
