"""Dataset ingestion (LIBSVM / CSV), splitting, standardization and the
synthetic generators used for desk-scale benchmarks.

Datasets are immutable after load: features are a dense (N, D) float matrix
with no NaN/Inf, labels are contiguous ids 0..C-1 remapped from the original
values in sorted order.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import Rng, sq_distances


class ParseError(ValueError):
    """Malformed dataset file; carries file and line context in the message."""


class DataWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("features must be a nonempty 2-D matrix")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be one id per row")
        if not np.isfinite(X).all():
            raise ValueError("features contain NaN/Inf")
        if y.min() < 0:
            raise ValueError("labels must be nonnegative ids")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train_idx, self.val_idx, self.test_idx)]
        object.__setattr__(self, "train_idx", parts[0])
        object.__setattr__(self, "val_idx", parts[1])
        object.__setattr__(self, "test_idx", parts[2])


def _remap_labels(raw: list) -> np.ndarray:
    """Map original label values to 0..C-1 by sorted original value."""
    try:
        keys = [float(v) for v in raw]
    except (TypeError, ValueError):
        keys = [str(v) for v in raw]
    order = {v: i for i, v in enumerate(sorted(set(keys)))}
    return np.array([order[v] for v in keys], dtype=np.int64)


# ---------------------------------------------------------------------------
# LIBSVM format
# ---------------------------------------------------------------------------


def load_libsvm(path) -> Dataset:
    """Parse `<label> <idx>:<value> ...` lines (1-based ascending indices)
    into a dense Dataset; absent indices are zero."""
    path = Path(path)
    rows: list[dict[int, float]] = []
    labels_raw: list[str] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                float(tokens[0])
            except ValueError:
                raise ParseError(f"{path.name}:{lineno}: label '{tokens[0]}' is not numeric")
            labels_raw.append(tokens[0])
            entries: dict[int, float] = {}
            prev_idx = 0
            for tok in tokens[1:]:
                if ":" not in tok:
                    raise ParseError(f"{path.name}:{lineno}: expected idx:value, got '{tok}'")
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"{path.name}:{lineno}: bad idx:value pair '{tok}'")
                if idx < 1 or idx <= prev_idx:
                    raise ParseError(f"{path.name}:{lineno}: indices must be 1-based ascending")
                prev_idx = idx
                entries[idx] = val
                max_idx = max(max_idx, idx)
            rows.append(entries)
    if not rows:
        raise ValueError(f"{path.name}: no data lines")
    dim = max(max_idx, 1)
    X = np.zeros((len(rows), dim), dtype=np.float64)
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    if not np.isfinite(X).all():
        raise ParseError(f"{path.name}: non-finite feature value")
    return Dataset(name=path.stem, features=X, labels=_remap_labels(labels_raw))


def save_libsvm(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            parts = [str(int(ds.labels[i]))]
            row = ds.features[i]
            for j in np.nonzero(row)[0]:
                parts.append(f"{j + 1}:{row[j]:.17g}")
            fh.write(" ".join(parts) + "\n")


# ---------------------------------------------------------------------------
# CSV format
# ---------------------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path, label_column: int | str = -1) -> Dataset:
    """Load a rectangular numeric CSV; the label column may hold strings.

    A header row is detected when some first-row cell is non-numeric in a
    column whose second-row cell is numeric.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path.name}: empty file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ParseError(f"{path.name}:{lineno}: ragged row ({len(row)} cells, expected {width})")

    header: list[str] | None = None
    if len(rows) >= 2 and any(
        not _is_number(rows[0][j]) and _is_number(rows[1][j]) for j in range(width)
    ):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path.name}: header but no data rows")

    if isinstance(label_column, str):
        if header is None:
            raise ValueError(f"{path.name}: label column '{label_column}' needs a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ValueError(f"{path.name}: no column named '{label_column}'")
    else:
        label_idx = label_column % width

    feat_cols = [j for j in range(width) if j != label_idx]
    if not feat_cols:
        raise ValueError(f"{path.name}: no feature columns")
    X = np.empty((len(rows), len(feat_cols)), dtype=np.float64)
    offset = 2 if header is not None else 1
    for i, row in enumerate(rows):
        for k, j in enumerate(feat_cols):
            cell = row[j].strip()
            if not _is_number(cell):
                raise ParseError(f"{path.name}:{i + offset}: non-numeric feature '{cell}'")
            X[i, k] = float(cell)
    if not np.isfinite(X).all():
        raise ParseError(f"{path.name}: non-finite feature value")
    labels = _remap_labels([row[label_idx].strip() for row in rows])
    names = [header[j] for j in feat_cols] if header is not None else None
    return Dataset(name=path.stem, features=X, labels=labels, feature_names=names)


def save_csv(ds: Dataset, path) -> None:
    """Write features + trailing `label` column; floats carry 17 significant
    digits so load(save(ds)) is bit-exact."""
    names = ds.feature_names or [f"x{j}" for j in range(ds.dim)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["label"])
        for i in range(ds.n):
            w.writerow([f"{v:.17g}" for v in ds.features[i]] + [int(ds.labels[i])])


# ---------------------------------------------------------------------------
# Splitting / standardization / subsampling
# ---------------------------------------------------------------------------


def _largest_remainder_counts(n: int, fractions) -> list[int]:
    raw = [f * n for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    short = n - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split(ds: Dataset, fractions, rng: Rng, stratified: bool = False) -> Split:
    """Random permutation partition into train/val/test by fractions.

    Counts follow largest-remainder rounding. Stratified mode preserves
    per-class proportions within one instance, falling back to unstratified
    (with a warning) when some class has fewer instances than active parts.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three nonnegative reals")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    n_parts_active = sum(1 for f in fractions if f > 0)
    if stratified:
        counts = np.bincount(ds.labels, minlength=ds.n_classes)
        if counts.min() < n_parts_active:
            warnings.warn(
                "class with fewer instances than split parts; falling back to unstratified",
                DataWarning,
            )
            stratified = False

    if not stratified:
        counts = _largest_remainder_counts(ds.n, fractions)
        perm = rng.permutation(ds.n)
        train = perm[: counts[0]]
        val = perm[counts[0] : counts[0] + counts[1]]
        test = perm[counts[0] + counts[1] :]
    else:
        parts: list[list[np.ndarray]] = [[], [], []]
        for c in range(ds.n_classes):
            idx_c = np.nonzero(ds.labels == c)[0]
            perm_c = idx_c[rng.permutation(len(idx_c))]
            c_counts = _largest_remainder_counts(len(idx_c), fractions)
            parts[0].append(perm_c[: c_counts[0]])
            parts[1].append(perm_c[c_counts[0] : c_counts[0] + c_counts[1]])
            parts[2].append(perm_c[c_counts[0] + c_counts[1] :])
        train, val, test = (np.concatenate(p) if p else np.array([], dtype=np.int64) for p in parts)

    if len(train) == 0:
        raise ValueError("train split is empty")
    return Split(train_idx=train, val_idx=val, test_idx=test)


def standardize(ds: Dataset, stats_from) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Center/scale every feature by statistics of the `stats_from` rows.

    Zero-variance features are scaled by 1. Returns the transformed dataset
    together with the per-feature mean and the scale actually applied.
    """
    stats_from = np.asarray(stats_from, dtype=np.int64)
    if len(stats_from) == 0:
        raise ValueError("stats_from must be nonempty")
    ref = ds.features[stats_from]
    mean = ref.mean(axis=0)
    std = ref.std(axis=0, ddof=0)
    scale = np.where(std > 0, std, 1.0)
    X = (ds.features - mean) / scale
    return Dataset(ds.name, X, ds.labels, ds.feature_names), mean, scale


def stratified_subsample(ds: Dataset, n: int, rng: Rng) -> Dataset:
    """Deterministic stratified draw of n instances (without replacement)."""
    if n >= ds.n:
        return ds
    counts = np.bincount(ds.labels, minlength=ds.n_classes)
    take = _largest_remainder_counts(n, counts / ds.n)
    picked = []
    for c in range(ds.n_classes):
        idx_c = np.nonzero(ds.labels == c)[0]
        k = min(max(take[c], 1), len(idx_c))
        picked.append(idx_c[rng.permutation(len(idx_c))[:k]])
    idx = np.sort(np.concatenate(picked))[:n]
    return Dataset(ds.name, ds.features[idx], ds.labels[idx], ds.feature_names)


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def _spaced_centers(k: int, dim: int, min_dist: float, rng: Rng) -> np.ndarray:
    box = max(2.0, float(k) ** (1.0 / dim)) * min_dist * 1.5
    while True:
        for _ in range(200):
            centers = np.array(rng.random(size=k * dim)).reshape(k, dim) * box
            if k == 1:
                return centers
            d2 = sq_distances(centers, centers)
            np.fill_diagonal(d2, np.inf)
            if d2.min() >= min_dist**2:
                return centers
        box *= 1.5


def make_blobs(n: int, k: int, dim: int, spread: float, rng: Rng, name: str = "blobs") -> Dataset:
    """Balanced Gaussian mixture; component centers at least 6*spread apart,
    labels are generating component ids."""
    if not (n >= k >= 1):
        raise ValueError("need n >= k >= 1")
    if spread <= 0:
        raise ValueError("spread must be positive")
    centers = _spaced_centers(k, dim, 6.0 * spread, rng)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    X = np.empty((n, dim))
    y = np.empty(n, dtype=np.int64)
    at = 0
    for c, size in enumerate(sizes):
        X[at : at + size] = centers[c] + spread * rng.normal(size=size * dim).reshape(size, dim)
        y[at : at + size] = c
        at += size
    return Dataset(name, X, y)


def make_split_blobs(
    n: int,
    blobs: int,
    dim: int,
    rng: Rng,
    margin: float = 0.0,
    flip_frac: float = 0.05,
    class_balance: float = 0.5,
    name: str = "split_blobs",
) -> Dataset:
    """Binary data whose class structure is finer than its density structure:
    each Gaussian blob is bisected into the two classes by its own random
    hyperplane (offset so `class_balance` of the blob falls in class 1), with
    a fraction of labels flipped. Density modes sit on class boundaries, so
    density-seeking prototypes are poorly placed while selected instances can
    land in class-pure halves."""
    if not (0 < class_balance < 1):
        raise ValueError("class_balance must lie in (0, 1)")
    if not (0 <= flip_frac < 0.5):
        raise ValueError("flip_frac must lie in [0, 0.5)")
    centers = _spaced_centers(blobs, dim, 6.0, rng)
    sizes = [n // blobs + (1 if i < n % blobs else 0) for i in range(blobs)]
    X = np.empty((n, dim))
    y = np.empty(n, dtype=np.int64)
    at = 0
    for b, size in enumerate(sizes):
        w = np.array(rng.normal(size=dim))
        w /= np.sqrt((w**2).sum())
        local = np.array(rng.normal(size=size * dim)).reshape(size, dim)
        proj = local @ w
        # threshold at the empirical quantile so the blob splits as requested
        thr = np.quantile(proj, 1.0 - class_balance)
        X[at : at + size] = centers[b] + local
        y[at : at + size] = (proj > thr + margin).astype(np.int64)
        at += size
    if flip_frac > 0:
        n_flip = int(round(n * flip_frac))
        idx = rng.permutation(n)[:n_flip]
        y[idx] = 1 - y[idx]
    return Dataset(name, X, y)


def make_interleaved(
    n: int,
    k: int,
    rng: Rng,
    gap: float = 1.0,
    elongation: float = 12.0,
    name: str = "interleaved",
) -> Dataset:
    """k elongated 2-D stripes running along the main diagonal, stacked with a
    small orthogonal gap. k-means recovers the stripes, but single axis-aligned
    cuts intersect them, which is the regime where greedy class-purity trees
    pay a high clustering-cost price."""
    if not (n >= k >= 1):
        raise ValueError("need n >= k >= 1")
    along = np.array([1.0, 1.0]) / np.sqrt(2.0)
    across = np.array([-1.0, 1.0]) / np.sqrt(2.0)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    X = np.empty((n, 2))
    y = np.empty(n, dtype=np.int64)
    at = 0
    for c, size in enumerate(sizes):
        t = (np.array(rng.random(size=size)) - 0.5) * elongation
        s = np.array(rng.normal(size=size)) * gap * 0.15
        offset = across * (c * gap)
        X[at : at + size] = offset + t[:, None] * along + s[:, None] * across
        y[at : at + size] = c
        at += size
    return Dataset(name, X, y)


def make_noisy_classes(
    n: int,
    n_classes: int,
    dim: int,
    rng: Rng,
    sep: float = 2.0,
    noise_frac: float = 0.25,
    class_weights=None,
    name: str = "noisy",
) -> Dataset:
    """Gaussian class blobs at pairwise distance `sep` (in units of the blob
    scale) plus a fraction of points with random labels scattered over the
    whole support. `class_weights` skews both the clean class sizes and the
    noise labels (default balanced). The noise floor and imbalance reward
    training-set curation."""
    if not (0 <= noise_frac < 1):
        raise ValueError("noise_frac must be in [0, 1)")
    if class_weights is None:
        weights = np.full(n_classes, 1.0 / n_classes)
    else:
        weights = np.asarray(class_weights, dtype=np.float64)
        if weights.shape != (n_classes,) or (weights <= 0).any():
            raise ValueError("class_weights must be positive, one per class")
        weights = weights / weights.sum()
    centers = _spaced_centers(n_classes, dim, sep, rng)
    n_noise = int(round(n * noise_frac))
    n_clean = n - n_noise
    sizes = _largest_remainder_counts(n_clean, weights)
    X = np.empty((n, dim))
    y = np.empty(n, dtype=np.int64)
    at = 0
    for c, size in enumerate(sizes):
        X[at : at + size] = centers[c] + rng.normal(size=size * dim).reshape(size, dim)
        y[at : at + size] = c
        at += size
    if n_noise:
        lo = centers.min(axis=0) - 2.0
        hi = centers.max(axis=0) + 2.0
        U = np.array(rng.random(size=n_noise * dim)).reshape(n_noise, dim)
        X[at:] = lo + U * (hi - lo)
        y[at:] = rng.choice(n_classes, size=n_noise, p=weights)
    return Dataset(name, X, y)
