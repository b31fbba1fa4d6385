import csv
import json
from pathlib import Path

import numpy as np
import pytest

from coasbench.bench import load_config, run, report, size_tag
from coasbench.bench.cli import main as cli_main
from coasbench.bench.config import ConfigError, MaxLeaves, validate_config
from coasbench.bench.report import ReportError
from coasbench.bench.runner import read_records
from coasbench.numerics import derive_seed


def base_config(tmp_path, **overrides):
    cfg = {
        "schema_version": 1,
        "task": "expclust",
        "datasets": [
            {"name": "diag", "generator": "interleaved", "n": 60, "k": 3, "seed": 3}
        ],
        "sizes": [{"max_leaves": 2}, {"max_leaves": 3}],
        "methods": ["CART", "IMM"],
        "trials": 2,
        "budget_T": 10,
        "seed": 99,
        "output_dir": str(tmp_path / "out"),
        "standardize": True,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


# ---------------------------------------------------------------- config


def test_config_roundtrip(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    assert cfg.task == "expclust"
    assert cfg.sizes == (MaxLeaves(2), MaxLeaves(3))
    assert size_tag(cfg.sizes[0]) == "k=2"


def test_config_rejections(tmp_path):
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "schema_version": 2})
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "task": "nope"})
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "methods": ["RF"]})
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "trials": 0})
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "sizes": []})
    with pytest.raises(ConfigError):
        validate_config({**base_config(tmp_path), "ns_bounds": [10, 10]})


# ---------------------------------------------------------------- runner


def test_run_produces_full_grid_and_resumes(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    path, n_errors = run(cfg)
    assert n_errors == 0
    records = read_records(path)
    # datasets x sizes x methods x trials
    assert len(records) == 1 * 2 * 2 * 2
    seen = set()
    for r in records:
        assert r["metric_name"] == "cost_ratio"
        assert r["metric_value"] >= 1.0 - 1e-9
        seen.add((r["dataset"], r["method"], r["size"], r["trial"]))
    assert len(seen) == 8

    executed = []
    path2, _ = run(cfg, progress=lambda rec: executed.append(rec))
    assert path2 == path
    assert executed == []  # idempotent resume: nothing recomputed
    assert len(read_records(path)) == 8


def test_run_seed_derivation_documented(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    path, _ = run(cfg)
    for r in read_records(path):
        expected = derive_seed(cfg.seed, r["dataset"], r["method"], r["size"], r["trial"])
        assert int(r["seed"]) == expected


def test_run_reproducible_across_directories(tmp_path):
    cfg_a = load_config(write_config(tmp_path, base_config(tmp_path, output_dir=str(tmp_path / "a")), "a.json"))
    cfg_b = load_config(write_config(tmp_path, base_config(tmp_path, output_dir=str(tmp_path / "b")), "b.json"))
    path_a, _ = run(cfg_a)
    path_b, _ = run(cfg_b)

    def stripped(path):
        rows = read_records(path)
        return [(r["dataset"], r["method"], r["size"], r["trial"], r["metric_value"], r["aux"])
                for r in rows]

    assert stripped(path_a) == stripped(path_b)


def test_run_manifest_mismatch_rejected(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    run(cfg)
    other = load_config(write_config(tmp_path, base_config(tmp_path, seed=100), "other.json"))
    with pytest.raises(ValueError, match="different config"):
        run(other)


def test_run_failing_cell_records_error_and_continues(tmp_path):
    cfg_dict = base_config(
        tmp_path,
        task="proto",
        datasets=[{"name": "blob", "generator": "blobs", "n": 50, "k": 2, "dim": 2,
                   "spread": 0.5, "seed": 1}],
        sizes=[{"num_prototypes": 1}, {"num_prototypes": 4}],
        methods=["c_RBFN"],
        trials=1,
        budget_T=4,
        gamma_grid=[1.0],
    )
    cfg = load_config(write_config(tmp_path, cfg_dict))
    path, n_errors = run(cfg)
    records = read_records(path)
    assert n_errors == 1  # n_p=1 cannot satisfy the (N_p-1, N_p) bounds
    errors = [r for r in records if r["metric_name"] == "error"]
    assert len(errors) == 1 and errors[0]["size"] == "np=1"
    assert "error" in errors[0]["aux"]
    ok = [r for r in records if r["metric_name"] == "f1_macro"]
    assert len(ok) == 1  # the healthy cell still ran


def test_run_subsample_is_per_trial(tmp_path):
    cfg_dict = base_config(
        tmp_path,
        datasets=[{"name": "big", "generator": "blobs", "n": 120, "k": 3, "dim": 2,
                   "spread": 0.4, "seed": 9}],
        sizes=[{"max_leaves": 3}],
        methods=["IMM"],
        trials=2,
        subsample_n=40,
    )
    cfg = load_config(write_config(tmp_path, cfg_dict))
    from coasbench.bench.methods import _effective_dataset
    from coasbench.bench.runner import materialize_dataset

    ds = materialize_dataset(cfg.datasets[0])
    sub0 = _effective_dataset(cfg, ds, 0)
    sub1 = _effective_dataset(cfg, ds, 1)
    assert sub0.n == sub1.n == 40
    assert not np.array_equal(sub0.features, sub1.features)  # fresh draw per trial
    again = _effective_dataset(cfg, ds, 0)
    assert np.array_equal(sub0.features, again.features)  # deterministic per trial
    path, n_errors = run(cfg)
    assert n_errors == 0


# ---------------------------------------------------------------- report


def test_report_two_methods_skips_friedman(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    path, _ = run(cfg)
    rep = report(path)
    assert rep.friedman is None
    assert any("Friedman" in n for n in rep.notices)
    assert set(rep.mean_ranks) == {"CART", "IMM"}
    assert len(rep.table.rows) == 1 * 2  # datasets x sizes, trials averaged away
    assert ("CART", "IMM") in rep.wilcoxon
    for fig in rep.figures:
        assert Path(fig).exists()
    assert (Path(cfg.output_dir) / "report.txt").exists()


def _write_records(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "dataset", "method", "size", "trial", "seed",
                    "metric_name", "metric_value", "wall_time_ms", "aux"])
        for r in rows:
            w.writerow(r)


def test_report_single_method_means_only(tmp_path):
    rows = [
        ["proto", "d1", "SNC", f"np={p}", t, 1, "f1_macro", 0.5 + 0.01 * t, 1.0, "{}"]
        for p in (5, 10) for t in range(3)
    ]
    path = tmp_path / "r.csv"
    _write_records(path, rows)
    rep = report(path, output_dir=tmp_path)
    assert rep.friedman is None and rep.wilcoxon == {}
    assert any("single method" in n for n in rep.notices)


def test_report_refuses_on_gaps(tmp_path):
    rows = [
        ["proto", "d1", "SNC", "np=5", 0, 1, "f1_macro", 0.5, 1.0, "{}"],
        ["proto", "d1", "KM_RBFN", "np=10", 0, 1, "f1_macro", 0.4, 1.0, "{}"],
    ]
    path = tmp_path / "r.csv"
    _write_records(path, rows)
    with pytest.raises(ReportError, match="missing cells"):
        report(path, output_dir=tmp_path)


def test_report_dominant_method_rank_and_wilcoxon(tmp_path):
    # method A strictly dominates over 16 pseudo-dataset rows
    rows = []
    rng = np.random.default_rng(0)
    for d in ("d1", "d2"):
        for p in (5, 10, 20, 40, 60, 80, 100, 120):
            base = 0.5 + 0.3 * rng.random()
            for t in range(2):
                rows.append(["proto", d, "A", f"np={p}", t, 1, "f1_macro", base + 0.1, 1.0, "{}"])
                rows.append(["proto", d, "B", f"np={p}", t, 1, "f1_macro", base, 1.0, "{}"])
                rows.append(["proto", d, "C", f"np={p}", t, 1, "f1_macro", base - 0.05 * (1 + t % 2), 1.0, "{}"])
    path = tmp_path / "r.csv"
    _write_records(path, rows)
    rep = report(path, output_dir=tmp_path)
    assert rep.mean_ranks["A"] == 1.0
    assert rep.friedman is not None and rep.friedman_methods == ["A", "B"]
    for pair, res in rep.wilcoxon.items():
        if "A" in pair:
            assert res.p_value < 0.01
            # enumeration oracle: 16 rows all favoring A gives p = 2/2^16
            if pair == ("A", "B"):
                assert res.p_value == 2 / 2**16


def test_report_friedman_top_override(tmp_path):
    cfg = load_config(write_config(tmp_path, base_config(tmp_path)))
    path, _ = run(cfg)
    rep = report(path, friedman_top=2)
    assert rep.friedman is not None
    assert len(rep.friedman_methods) == 2


# ---------------------------------------------------------------- cli


def test_cli_validate_and_run(tmp_path, capsys):
    cfg_path = write_config(tmp_path, base_config(tmp_path))
    assert cli_main(["validate", "--config", str(cfg_path)]) == 0
    bad = write_config(tmp_path, {**base_config(tmp_path), "task": "zzz"}, "bad.json")
    assert cli_main(["validate", "--config", str(bad)]) == 2
    assert cli_main(["run", "--config", str(cfg_path)]) == 0
    out_csv = Path(json.loads(cfg_path.read_text())["output_dir"]) / "results.csv"
    assert cli_main(["report", "--input", str(out_csv)]) == 0
    captured = capsys.readouterr()
    assert "mean ranks" in captured.out


def test_cli_make_blobs(tmp_path):
    out = tmp_path / "blobs.csv"
    rc = cli_main(["datasets", "make-blobs", "--n", "30", "--k", "3", "--dim", "2",
                   "--spread", "0.4", "--seed", "5", "--out", str(out)])
    assert rc == 0
    from coasbench.data import load_csv

    ds = load_csv(out, label_column="label")
    assert ds.n == 30 and ds.n_classes == 3
