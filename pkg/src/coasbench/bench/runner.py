"""Grid execution: every (dataset x size x method x trial) cell runs with a
deterministically derived seed, appends one record to an append-only CSV, and
completed cells are skipped on resume.

Cell seed = derive_seed(root_seed, dataset, method, size_tag, trial); the
derivation is the stable documented contract, so identical configs reproduce
identical results files except for wall-time columns.
"""
from __future__ import annotations

import csv
import json
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..data import (Dataset, load_csv, load_libsvm, make_blobs, make_interleaved,
                    make_noisy_classes, make_split_blobs)
from ..numerics import Rng, derive_seed
from .config import METRIC_BY_TASK, ExperimentConfig, size_tag
from .methods import CELL_RUNNERS

RESULT_COLUMNS = (
    "task", "dataset", "method", "size", "trial", "seed",
    "metric_name", "metric_value", "wall_time_ms", "aux",
)

WORKERS_ENV = "COASBENCH_WORKERS"


@dataclass(frozen=True)
class BenchResultRecord:
    task: str
    dataset: str
    method: str
    size: str
    trial: int
    seed: int
    metric_name: str
    metric_value: float
    wall_time_ms: float
    aux: str

    def row(self) -> list:
        return [self.task, self.dataset, self.method, self.size, self.trial,
                self.seed, self.metric_name, f"{self.metric_value:.17g}",
                f"{self.wall_time_ms:.3f}", self.aux]

    @property
    def key(self):
        return (self.task, self.dataset, self.method, self.size, self.trial,
                self.metric_name)


def materialize_dataset(spec) -> Dataset:
    if spec.path is not None:
        if spec.fmt == "libsvm":
            ds = load_libsvm(spec.path)
        else:
            ds = load_csv(spec.path, label_column=spec.label_column)
        return Dataset(spec.name, ds.features, ds.labels, ds.feature_names)
    params = dict(spec.params)
    gen_seed = int(params.pop("seed", 0))
    rng = Rng(gen_seed)
    if spec.generator == "blobs":
        return make_blobs(n=int(params["n"]), k=int(params["k"]), dim=int(params["dim"]),
                          spread=float(params["spread"]), rng=rng, name=spec.name)
    if spec.generator == "split_blobs":
        return make_split_blobs(n=int(params["n"]), blobs=int(params["blobs"]),
                                dim=int(params["dim"]), rng=rng,
                                margin=float(params.get("margin", 0.0)),
                                flip_frac=float(params.get("flip_frac", 0.05)),
                                class_balance=float(params.get("class_balance", 0.5)),
                                name=spec.name)
    if spec.generator == "interleaved":
        return make_interleaved(n=int(params["n"]), k=int(params["k"]), rng=rng,
                                gap=float(params.get("gap", 1.0)),
                                elongation=float(params.get("elongation", 12.0)),
                                name=spec.name)
    return make_noisy_classes(n=int(params["n"]), n_classes=int(params["classes"]),
                              dim=int(params["dim"]), rng=rng,
                              sep=float(params.get("sep", 2.0)),
                              noise_frac=float(params.get("noise_frac", 0.25)),
                              class_weights=params.get("class_weights"),
                              name=spec.name)


def _prepare_datasets(cfg: ExperimentConfig) -> dict[str, Dataset]:
    # subsample_n is applied per trial inside the cell runners
    return {spec.name: materialize_dataset(spec) for spec in cfg.datasets}


def _read_done_keys(path: Path) -> set:
    done = set()
    if not path.exists():
        return done
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            done.add((row["task"], row["dataset"], row["method"], row["size"],
                      int(row["trial"]), row["metric_name"]))
    return done


def _execute_cell(cfg: ExperimentConfig, datasets, task, ds_name, size, method, trial):
    cell_seed = derive_seed(cfg.seed, ds_name, method, size_tag(size), trial)
    runner = CELL_RUNNERS[task]
    start = time.perf_counter()
    try:
        value, aux = runner(cfg, datasets[ds_name], size, method, trial, cell_seed)
        metric_name = METRIC_BY_TASK[task]
    except Exception:
        value = float("nan")
        aux = {"error": traceback.format_exc(limit=3).strip().replace("\n", " | ")}
        metric_name = "error"
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return BenchResultRecord(
        task=task, dataset=ds_name, method=method, size=size_tag(size), trial=trial,
        seed=cell_seed, metric_name=metric_name, metric_value=value,
        wall_time_ms=elapsed_ms, aux=json.dumps(aux, sort_keys=True),
    )


def run(cfg: ExperimentConfig, progress=None) -> tuple[Path, int]:
    """Execute the grid; returns (results path, number of failed cells).

    Appends one record per completed cell and skips cells already present in
    the results file, so interrupted runs resume. A manifest of the config is
    written next to the results file and must match on resume.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    manifest_path = out_dir / "results.manifest.json"

    manifest = cfg.to_json_dict()
    if manifest_path.exists():
        existing = json.loads(manifest_path.read_text(encoding="utf-8"))
        if existing != manifest:
            raise ValueError(
                f"{manifest_path} belongs to a different config; "
                "use a fresh output_dir or delete the stale results"
            )
    else:
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                 encoding="utf-8")

    datasets = _prepare_datasets(cfg)
    done = _read_done_keys(results_path)

    cells = [
        (cfg.task, spec.name, size, method, trial)
        for spec in cfg.datasets
        for size in cfg.sizes
        for method in cfg.methods
        for trial in range(cfg.trials)
    ]
    metric_name = METRIC_BY_TASK[cfg.task]
    pending = [
        c for c in cells
        if (c[0], c[1], c[3], size_tag(c[2]), c[4], metric_name) not in done
        and (c[0], c[1], c[3], size_tag(c[2]), c[4], "error") not in done
    ]

    new_file = not results_path.exists()
    n_errors = 0
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    with open(results_path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULT_COLUMNS)
            fh.flush()

        def emit(record: BenchResultRecord):
            nonlocal n_errors
            writer.writerow(record.row())
            fh.flush()
            if record.metric_name == "error":
                n_errors += 1
            if progress is not None:
                progress(record)

        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_execute_cell, cfg, datasets, *cell) for cell in pending
                ]
                for fut in futures:
                    emit(fut.result())
        else:
            for cell in pending:
                emit(_execute_cell(cfg, datasets, *cell))
    return results_path, n_errors


def read_records(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["trial"] = int(row["trial"])
        row["metric_value"] = float(row["metric_value"])
        row["wall_time_ms"] = float(row["wall_time_ms"])
    return rows
