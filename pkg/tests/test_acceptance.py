"""Acceptance suite: one test per criterion, each printing a PASS line with
its headline numbers. The heavy grid configs are frozen here, seeds included,
so the whole suite is deterministic.

Run with: pytest tests/test_acceptance.py -v -s
"""
import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from coasbench import coas
from coasbench.bench.config import validate_config
from coasbench.bench.report import report
from coasbench.bench.runner import read_records, run
from coasbench.data import make_blobs, make_noisy_classes
from coasbench.evalstats import (
    RankTable,
    f1_macro,
    friedman_test,
    wilcoxon_signed_rank,
)
from coasbench.expclust import evaluate_tree, explain_with_cart, imm_fit
from coasbench.learners import cart_fit, cart_predict, kmeans_fit
from coasbench.numerics import Rng
from coasbench.prototypes import (
    c_rbfn_fit,
    fcnn1_fit,
    protonn_loss_grad,
    snc_loss_grad,
)


def _pass(criterion, detail, started):
    print(f"[ACCEPTANCE] criterion {criterion}: PASS ({detail}) "
          f"[{time.time() - started:.1f}s]")


# ---------------------------------------------------------------------------
# independent oracles (duplicated on purpose: the suite audits itself)
# ---------------------------------------------------------------------------


def _avg_ranks(vals, lower_is_rank1=True):
    order = sorted(range(len(vals)), key=lambda i: (vals[i] if lower_is_rank1 else -vals[i], i))
    ranks = [0.0] * len(vals)
    i = 0
    while i < len(vals):
        j = i
        while j + 1 < len(vals) and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_oracle(a, b):
    d = [x - y for x, y in zip(a, b) if x != y]
    n = len(d)
    if n == 0:
        return 1.0
    r2 = [int(round(r * 2)) for r in _avg_ranks([abs(v) for v in d])]
    total2 = sum(r2)
    wp2 = sum(r for r, v in zip(r2, d) if v > 0)
    w2_obs = min(wp2, total2 - wp2)
    count = 0
    for bits in range(1 << n):
        wp = sum(r2[i] for i in range(n) if bits >> i & 1)
        if min(wp, total2 - wp) <= w2_obs:
            count += 1
    return count / (1 << n)


def friedman_oracle(values, higher_better):
    n, k = values.shape
    rows2 = [
        tuple(int(round(x * 2)) for x in _avg_ranks(values[i], lower_is_rank1=not higher_better))
        for i in range(n)
    ]
    target = n * (k + 1)

    def s2(cols):
        return sum((c - target) ** 2 for c in cols)

    obs = s2([sum(r[j] for r in rows2) for j in range(k)])
    hits = total = 0
    for combo in itertools.product(*[list(itertools.permutations(r)) for r in rows2]):
        total += 1
        if s2([sum(r[j] for r in combo) for j in range(k)]) >= obs:
            hits += 1
    return hits / total


def brute_force_partition_cost(X, k):
    """Vectorized enumeration of all k^N assignments."""
    n = len(X)
    codes = np.arange(k**n, dtype=np.int64)
    best = np.inf
    assigns = (codes[:, None] // k ** np.arange(n, dtype=np.int64)[None, :]) % k
    sq = (X**2).sum(axis=1)
    costs = np.zeros(len(codes))
    for j in range(k):
        mask = assigns == j
        cnt = mask.sum(axis=1)
        sums = mask @ X
        tot_sq = mask @ sq
        with np.errstate(invalid="ignore", divide="ignore"):
            centered = tot_sq - (sums**2).sum(axis=1) / np.maximum(cnt, 1)
        costs += np.where(cnt > 0, centered, 0.0)
    return float(costs.min() / n)


def fd_grad(f, P, h=1e-6):
    G = np.zeros_like(P)
    it = np.nditer(P, flags=["multi_index"])
    while not it.finished:
        ij = it.multi_index
        Pp = P.copy(); Pp[ij] += h
        Pm = P.copy(); Pm[ij] -= h
        G[ij] = (f(Pp) - f(Pm)) / (2 * h)
        it.iternext()
    return G


# ---------------------------------------------------------------------------
# frozen grid configs
# ---------------------------------------------------------------------------

ROOT_SEED = 20260808

EXPCLUST_CONFIG = {
    "schema_version": 1,
    "task": "expclust",
    "datasets": [
        {"name": "mix8x12", "generator": "noisy", "n": 1000, "classes": 8, "dim": 12,
         "sep": 3.2, "noise_frac": 0.1, "seed": 77},
        {"name": "mix7x12", "generator": "noisy", "n": 1000, "classes": 7, "dim": 12,
         "sep": 3.4, "noise_frac": 0.12, "seed": 41},
        {"name": "mix9x10", "generator": "noisy", "n": 1000, "classes": 9, "dim": 10,
         "sep": 3.0, "noise_frac": 0.1, "seed": 71},
    ],
    "sizes": [{"max_leaves": k} for k in (2, 3, 4, 5, 6)],
    "methods": ["CART", "c_CART"],
    "trials": 5,
    "budget_T": 200,
    "seed": ROOT_SEED,
    "output_dir": "",  # filled per test
    "ns_bounds": [100, 1000],
}

PROTO_CONFIG = {
    "schema_version": 1,
    "task": "proto",
    "datasets": [
        {"name": "splitA", "generator": "split_blobs", "n": 700, "blobs": 10, "dim": 10,
         "flip_frac": 0.07, "class_balance": 0.3, "seed": 91},
        {"name": "splitB", "generator": "split_blobs", "n": 700, "blobs": 10, "dim": 12,
         "flip_frac": 0.08, "class_balance": 0.25, "seed": 22},
        {"name": "splitC", "generator": "split_blobs", "n": 700, "blobs": 9, "dim": 10,
         "flip_frac": 0.06, "class_balance": 0.35, "seed": 33},
    ],
    "sizes": [{"num_prototypes": p} for p in (10, 20, 40)],
    "methods": ["KM_RBFN", "c_RBFN"],
    "trials": 5,
    "budget_T": 150,
    "seed": ROOT_SEED,
    "output_dir": "",
}

RF_CONFIG = {
    "schema_version": 1,
    "task": "rf",
    "datasets": [
        {"name": "mc4", "generator": "noisy", "n": 800, "classes": 4, "dim": 6,
         "sep": 4.0, "noise_frac": 0.32, "seed": 37},
        {"name": "mc5", "generator": "noisy", "n": 800, "classes": 5, "dim": 7,
         "sep": 4.2, "noise_frac": 0.3, "seed": 53},
        {"name": "mc6", "generator": "noisy", "n": 800, "classes": 6, "dim": 8,
         "sep": 3.8, "noise_frac": 0.3, "seed": 67},
    ],
    "sizes": [{"num_trees": t, "max_depth": d} for t in (2, 5) for d in (1, 2, 5)],
    "methods": ["RF", "c_RF", "OTE", "subforest"],
    "trials": 3,
    "budget_T": 300,
    "seed": ROOT_SEED,
    "output_dir": "",
}


@pytest.fixture(scope="module")
def expclust_results(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_expclust")
    cfg = validate_config({**EXPCLUST_CONFIG, "output_dir": str(out)})
    path, n_errors = run(cfg)
    assert n_errors == 0
    return path


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_statistics_oracle_equivalence():
    started = time.time()
    rng = Rng(1001)
    checked_w = 0
    for trial in range(100):
        n = 3 + trial % 10  # up to 12
        a = np.asarray(rng.integers(0, 6, size=n), dtype=float) / 2.0
        b = np.asarray(rng.integers(0, 6, size=n), dtype=float) / 2.0
        res = wilcoxon_signed_rank(a, b)
        assert res.p_value == wilcoxon_oracle(a.tolist(), b.tolist())
        checked_w += 1

    checked_f = 0
    for trial in range(40):
        n = 2 + trial % 3  # up to 4 rows, k=3
        vals = np.asarray(rng.integers(0, 5, size=n * 3), dtype=float).reshape(n, 3)
        t = RankTable([f"r{i}" for i in range(n)], ["A", "B", "C"], vals, "higher_better")
        res = friedman_test(t)
        assert res.method == "exact"
        assert res.p_value == friedman_oracle(vals, True)
        checked_f += 1
    _pass(1, f"wilcoxon bitwise {checked_w}/100, friedman bitwise {checked_f}/40", started)


def test_criterion_02_brute_force_clustering_oracle():
    started = time.time()
    rng = Rng(2002)
    km_hits = 0
    for trial in range(100):
        n = 8 + trial % 5      # 8..12
        k = 2 + trial % 2      # 2..3
        X = np.array(rng.normal(size=n * 2)).reshape(n, 2)
        opt = brute_force_partition_cost(X, k)
        km = kmeans_fit(X, k, rng.spawn("km", trial), n_restarts=50)
        assert km.cost >= opt - 1e-9
        if km.cost <= opt + 1e-9:
            km_hits += 1
        tree = imm_fit(X, km)
        ev = evaluate_tree(tree, X, km)
        assert ev.j_ex >= opt - 1e-9
        _, ev_cart, _ = explain_with_cart(X, km)
        assert ev_cart.j_ex >= opt - 1e-9
    assert km_hits >= 95
    _pass(2, f"kmeans optimal on {km_hits}/100; all trees >= brute-force bound", started)


def test_criterion_03_separable_case_exactness():
    started = time.time()
    for k in (2, 3, 4):
        ds = make_blobs(30 * k, k, 2, 0.4, Rng(3003 + k))
        ref = kmeans_fit(ds.features, k, Rng(4004 + k), n_restarts=50)
        tree = imm_fit(ds.features, ref)
        ev_imm = evaluate_tree(tree, ds.features, ref)
        assert abs(ev_imm.cost_ratio - 1.0) <= 1e-9
        _, ev_cart, _ = explain_with_cart(ds.features, ref)
        assert abs(ev_cart.cost_ratio - 1.0) <= 1e-9
    _pass(3, "IMM and CART cost ratio 1.0 +/- 1e-9 for k in {2,3,4}", started)


def test_criterion_04_coas_expclust_direction(expclust_results):
    started = time.time()
    rep = report(expclust_results)
    assert rep.mean_ranks["c_CART"] < rep.mean_ranks["CART"]
    res = rep.wilcoxon[("CART", "c_CART")]
    assert res.p_value < 0.01
    _pass(4, f"ranks c_CART {rep.mean_ranks['c_CART']:.3f} < CART "
             f"{rep.mean_ranks['CART']:.3f}; wilcoxon p={res.p_value:.2e}", started)


def test_criterion_05_coas_prototypes_direction(tmp_path):
    started = time.time()
    cfg = validate_config({**PROTO_CONFIG, "output_dir": str(tmp_path)})
    path, n_errors = run(cfg)
    assert n_errors == 0
    records = read_records(path)
    cells = {}
    for r in records:
        cells.setdefault((r["dataset"], r["size"], r["method"]), []).append(r["metric_value"])
    wins = total = 0
    for ds in ("splitA", "splitB", "splitC"):
        for s in ("np=10", "np=20", "np=40"):
            total += 1
            if np.mean(cells[(ds, s, "c_RBFN")]) >= np.mean(cells[(ds, s, "KM_RBFN")]):
                wins += 1
    rep = report(path)
    res = rep.wilcoxon[("KM_RBFN", "c_RBFN")]
    assert wins >= math.ceil(0.7 * total)
    assert res.p_value < 0.05
    _pass(5, f"c_RBFN >= KM_RBFN in {wins}/{total} cells; wilcoxon p={res.p_value:.4f}",
          started)


def test_criterion_06_coas_forests_direction(tmp_path):
    started = time.time()
    cfg = validate_config({**RF_CONFIG, "output_dir": str(tmp_path)})
    path, n_errors = run(cfg)
    assert n_errors == 0
    rep = report(path)
    res = rep.wilcoxon[("RF", "c_RF")]
    assert res.p_value < 0.05
    best = min(rep.mean_ranks, key=rep.mean_ranks.get)
    assert best == "c_RF"
    _pass(6, f"wilcoxon RF vs c_RF p={res.p_value:.4f}; mean ranks "
             + ", ".join(f"{m}={v:.2f}" for m, v in sorted(rep.mean_ranks.items(),
                                                           key=lambda kv: kv[1])), started)


def test_criterion_07_gradient_checks():
    started = time.time()
    rng = Rng(7007)
    X = np.array(rng.normal(size=12)).reshape(6, 2)
    y = np.array([0, 0, 0, 1, 1, 1])
    labels = np.array([0, 1])
    worst = 0.0
    for probe in range(10):
        P = np.array(rng.normal(size=4)).reshape(2, 2)
        _, grad = snc_loss_grad(X, y, P, labels, gamma=0.8)
        num = fd_grad(lambda Q: snc_loss_grad(X, y, Q, labels, 0.8)[0], P)
        err = np.abs(grad - num).max() / max(np.abs(num).max(), 1e-12)
        worst = max(worst, err)
        assert err <= 1e-5
    y1h = np.eye(2)[y]
    for probe in range(10):
        B = np.array(rng.normal(size=4)).reshape(2, 2)
        Z = np.array(rng.normal(size=4)).reshape(2, 2)
        _, gB, gZ = protonn_loss_grad(X, y1h, B, Z, gamma=0.7)
        numB = fd_grad(lambda Q: protonn_loss_grad(X, y1h, Q, Z, 0.7)[0], B)
        numZ = fd_grad(lambda Q: protonn_loss_grad(X, y1h, B, Q, 0.7)[0], Z)
        errB = np.abs(gB - numB).max() / max(np.abs(numB).max(), 1e-12)
        errZ = np.abs(gZ - numZ).max() / max(np.abs(numZ).max(), 1e-12)
        worst = max(worst, errB, errZ)
        assert errB <= 1e-5 and errZ <= 1e-5
    _pass(7, f"max relative gradient error {worst:.2e}", started)


def test_criterion_08_fcnn1_consistency():
    started = time.time()
    rng = Rng(8008)
    for trial in range(100):
        ds = make_noisy_classes(40 + trial % 20, 2 + trial % 2, 2,
                                rng.spawn("d", trial), sep=4.0, noise_frac=0.25)
        _, keep = np.unique(ds.features, axis=0, return_index=True)
        X, y = ds.features[np.sort(keep)], ds.labels[np.sort(keep)]
        res = fcnn1_fit(X, y)
        assert res.consistent
        # exhaustive 1-NN consistency predicate
        final = res.subsets[-1]
        for i in range(len(X)):
            d2 = ((X[final] - X[i]) ** 2).sum(axis=1)
            assert y[final[int(np.argmin(d2))]] == y[i]
        for a, b in zip(res.subsets[:-1], res.subsets[1:]):
            assert set(a.tolist()) < set(b.tolist())
    _pass(8, "100/100 consistent with strictly nested subsets", started)


def test_criterion_09_budget_and_bounds_contracts():
    started = time.time()
    ds = make_noisy_classes(200, 2, 4, Rng(9009), sep=3.0, noise_frac=0.2)
    X, y = ds.features, ds.labels
    calls = []
    sizes = []

    def train(Xs, ys):
        sizes.append(len(Xs))
        return cart_fit(Xs, ys, max_leaves=3, class_weighting="balanced", n_classes=2)

    def metric(m, Xv, yv):
        return f1_macro(yv, cart_predict(m, Xv), 2)

    T = 64
    res = coas.optimize(train, metric, X[:140], y[:140], X[140:], y[140:],
                        budget_T=T, ns_bounds=(30, 120), rng=Rng(9010),
                        instrument=lambda i: calls.append(i))
    assert calls == list(range(T))
    assert len(sizes) == T
    assert all(30 <= s <= 120 for s in sizes)
    assert all(30 <= t.params.n_s <= 120 for t in res.history)

    counts = set()
    for n_p in (6, 12):
        model, info = c_rbfn_fit(X, y, n_p, gamma_grid=(0.1, 1.0), budget_T=20,
                                 rng=Rng(9011 + n_p))
        assert len(model.prototypes) in (n_p - 1, n_p)
        counts.add((n_p, len(model.prototypes)))
        for trial in info["history"]:
            assert n_p - 1 <= trial.params.n_s <= n_p
    _pass(9, f"T invocations exact; n_s within bounds; c_RBFN counts {sorted(counts)}",
          started)


def test_criterion_10_reproducibility(expclust_results, tmp_path):
    started = time.time()
    cfg = validate_config({**EXPCLUST_CONFIG, "output_dir": str(tmp_path / "again")})
    path2, n_errors = run(cfg)
    assert n_errors == 0

    def stripped(path):
        out = []
        for r in read_records(path):
            out.append((r["task"], r["dataset"], r["method"], r["size"], r["trial"],
                        r["seed"], r["metric_name"], f"{r['metric_value']:.17g}", r["aux"]))
        return sorted(out)

    first = stripped(expclust_results)
    second = stripped(path2)
    assert first == second
    _pass(10, f"two runs identical modulo wall_time ({len(first)} records)", started)


REAL_DATA_DIR = os.environ.get("COASBENCH_REAL_DATA_DIR")


@pytest.mark.skipif(not REAL_DATA_DIR, reason="set COASBENCH_REAL_DATA_DIR to run")
def test_criterion_11_extended_real_datasets(tmp_path):
    """Optional: qualitative ordering on the public datasets at 1000 instances
    (CART worst by mean rank; c_CART within 0.5 mean rank of IMM)."""
    started = time.time()
    names = ["avila", "Sensorless", "covtype.binary", "covtype", "mice-protein"]
    datasets = []
    for name in names:
        found = None
        for ext, fmt in ((".libsvm", "libsvm"), (".txt", "libsvm"), (".csv", "csv")):
            cand = Path(REAL_DATA_DIR) / f"{name}{ext}"
            if cand.exists():
                found = {"name": name, "path": str(cand), "format": fmt}
                break
        if found is None:
            pytest.skip(f"dataset {name} not found in {REAL_DATA_DIR}")
        datasets.append(found)
    cfg = validate_config({
        "schema_version": 1, "task": "expclust", "datasets": datasets,
        "sizes": [{"max_leaves": k} for k in range(2, 11)],
        "methods": ["CART", "c_CART", "IMM"],
        "trials": 5, "budget_T": 2000, "seed": ROOT_SEED,
        "output_dir": str(tmp_path), "subsample_n": 1000,
    })
    path, n_errors = run(cfg)
    assert n_errors == 0
    rep = report(path)
    ranks = rep.mean_ranks
    assert max(ranks, key=ranks.get) == "CART"  # worst mean rank
    assert abs(ranks["c_CART"] - ranks["IMM"]) < 0.5
    _pass(11, f"ranks {ranks}", started)
