"""Experiment configuration: model-size variants, dataset specs (files or
synthetic generators) and the versioned JSON config schema used by the CLI.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

TASKS = ("expclust", "proto", "rf")

METHODS_BY_TASK = {
    "expclust": ("CART", "c_CART", "IMM"),
    "proto": ("KM_RBFN", "c_RBFN", "SNC", "ProtoNN", "FCNN1"),
    "rf": ("RF", "c_RF", "OTE", "subforest"),
}

METRIC_BY_TASK = {
    "expclust": "cost_ratio",
    "proto": "f1_macro",
    "rf": "f1_macro",
}

ORIENTATION_BY_METRIC = {
    "cost_ratio": "lower_better",
    "f1_macro": "higher_better",
}

DEFAULT_BUDGET_BY_TASK = {"expclust": 2000, "proto": 1000, "rf": 3000}

GENERATORS = ("blobs", "interleaved", "noisy", "split_blobs")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MaxLeaves:
    k: int


@dataclass(frozen=True)
class NumPrototypes:
    n_p: int


@dataclass(frozen=True)
class ForestShape:
    num_trees: int
    max_depth: int


def size_tag(size) -> str:
    """Stable serialization used in results files and seed derivation."""
    if isinstance(size, MaxLeaves):
        return f"k={size.k}"
    if isinstance(size, NumPrototypes):
        return f"np={size.n_p}"
    if isinstance(size, ForestShape):
        return f"trees={size.num_trees},depth={size.max_depth}"
    raise ConfigError(f"unknown model size {size!r}")


def size_sort_key(size):
    if isinstance(size, MaxLeaves):
        return (size.k,)
    if isinstance(size, NumPrototypes):
        return (size.n_p,)
    return (size.num_trees, size.max_depth)


def _parse_size(task: str, obj: dict):
    try:
        if task == "expclust":
            return MaxLeaves(k=int(obj["max_leaves"]))
        if task == "proto":
            return NumPrototypes(n_p=int(obj["num_prototypes"]))
        return ForestShape(num_trees=int(obj["num_trees"]), max_depth=int(obj["max_depth"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad size entry {obj!r} for task '{task}': {exc}")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: str | None = None
    fmt: str | None = None           # "libsvm" | "csv"
    label_column: object = -1
    generator: str | None = None     # synthetic: "blobs" | "interleaved" | "noisy"
    params: dict = field(default_factory=dict)


def _parse_dataset(obj: dict) -> DatasetSpec:
    if "name" not in obj:
        raise ConfigError(f"dataset entry missing 'name': {obj!r}")
    if "path" in obj:
        fmt = obj.get("format")
        if fmt not in ("libsvm", "csv"):
            raise ConfigError(f"dataset '{obj['name']}': format must be libsvm or csv")
        return DatasetSpec(name=obj["name"], path=obj["path"], fmt=fmt,
                           label_column=obj.get("label_column", -1))
    gen = obj.get("generator")
    if gen not in GENERATORS:
        raise ConfigError(f"dataset '{obj['name']}': unknown generator {gen!r}")
    params = {k: v for k, v in obj.items() if k not in ("name", "generator")}
    return DatasetSpec(name=obj["name"], generator=gen, params=params)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    datasets: tuple[DatasetSpec, ...]
    sizes: tuple
    methods: tuple[str, ...]
    trials: int
    budget_T: int
    seed: int
    output_dir: str
    standardize: bool = True
    subsample_n: int | None = None
    gamma_grid: tuple = (0.001, 0.01, 0.1, 1.0, 10.0)
    ns_bounds: tuple[int, int] | None = None
    strategy: str = "gp"

    def to_json_dict(self) -> dict:
        sizes = []
        for s in self.sizes:
            if isinstance(s, MaxLeaves):
                sizes.append({"max_leaves": s.k})
            elif isinstance(s, NumPrototypes):
                sizes.append({"num_prototypes": s.n_p})
            else:
                sizes.append({"num_trees": s.num_trees, "max_depth": s.max_depth})
        datasets = []
        for d in self.datasets:
            if d.path is not None:
                datasets.append({"name": d.name, "path": d.path, "format": d.fmt,
                                 "label_column": d.label_column})
            else:
                datasets.append({"name": d.name, "generator": d.generator, **d.params})
        return {
            "schema_version": SCHEMA_VERSION,
            "task": self.task,
            "datasets": datasets,
            "sizes": sizes,
            "methods": list(self.methods),
            "trials": self.trials,
            "budget_T": self.budget_T,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "standardize": self.standardize,
            "subsample_n": self.subsample_n,
            "gamma_grid": list(self.gamma_grid),
            "ns_bounds": list(self.ns_bounds) if self.ns_bounds else None,
            "strategy": self.strategy,
        }


def validate_config(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    task = obj.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")

    datasets = obj.get("datasets")
    if not datasets:
        raise ConfigError("datasets must be a nonempty list")
    ds = tuple(_parse_dataset(d) for d in datasets)
    names = [d.name for d in ds]
    if len(set(names)) != len(names):
        raise ConfigError("dataset names must be unique")

    sizes_raw = obj.get("sizes")
    if not sizes_raw:
        raise ConfigError("sizes must be a nonempty list")
    sizes = tuple(_parse_size(task, s) for s in sizes_raw)

    methods = tuple(obj.get("methods") or ())
    if not methods:
        raise ConfigError("methods must be a nonempty list")
    valid = METHODS_BY_TASK[task]
    bad = [m for m in methods if m not in valid]
    if bad:
        raise ConfigError(f"methods {bad} invalid for task '{task}' (valid: {valid})")

    trials = obj.get("trials")
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be a positive integer")
    budget = obj.get("budget_T", DEFAULT_BUDGET_BY_TASK[task])
    if not isinstance(budget, int) or budget < 1:
        raise ConfigError("budget_T must be a positive integer")
    seed = obj.get("seed")
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    output_dir = obj.get("output_dir")
    if not output_dir:
        raise ConfigError("output_dir is required")

    subsample_n = obj.get("subsample_n")
    if subsample_n is not None and (not isinstance(subsample_n, int) or subsample_n < 1):
        raise ConfigError("subsample_n must be a positive integer or null")
    ns_bounds = obj.get("ns_bounds")
    if ns_bounds is not None:
        if (not isinstance(ns_bounds, (list, tuple)) or len(ns_bounds) != 2
                or not all(isinstance(v, int) for v in ns_bounds) or not ns_bounds[0] < ns_bounds[1]):
            raise ConfigError("ns_bounds must be [lo, hi] integers with lo < hi")
        ns_bounds = (ns_bounds[0], ns_bounds[1])
    gamma_grid = tuple(obj.get("gamma_grid", (0.001, 0.01, 0.1, 1.0, 10.0)))
    if not gamma_grid or any(g <= 0 for g in gamma_grid):
        raise ConfigError("gamma_grid must be a nonempty list of positive reals")
    strategy = obj.get("strategy", "gp")
    if strategy not in ("gp", "random"):
        raise ConfigError("strategy must be 'gp' or 'random'")

    return ExperimentConfig(
        task=task, datasets=ds, sizes=sizes, methods=methods, trials=trials,
        budget_T=budget, seed=seed, output_dir=output_dir,
        standardize=bool(obj.get("standardize", True)), subsample_n=subsample_n,
        gamma_grid=gamma_grid, ns_bounds=ns_bounds, strategy=strategy,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return validate_config(obj)
