"""Budgeted black-box maximization over a box-bounded mixed real/integer
space: a Gaussian-process surrogate with expected-improvement acquisition,
plus a pure random-search strategy behind the same contract.

The contract is deliberately small: exactly `budget_T` objective evaluations,
no early stopping, and the returned best is the argmax of the recorded
history (earliest iteration on ties). Non-finite objective values are
recorded as failed trials with objective -inf and never enter the surrogate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import Rng, sq_distances


@dataclass(frozen=True)
class Dim:
    name: str
    kind: str = "real"  # "real" | "integer"
    lower: float = 0.0
    upper: float = 1.0
    scale: str = "linear"  # "linear" | "log10"

    def __post_init__(self):
        if self.kind not in ("real", "integer"):
            raise ValueError(f"bad kind '{self.kind}'")
        if self.scale not in ("linear", "log10"):
            raise ValueError(f"bad scale '{self.scale}'")
        if not self.lower < self.upper:
            raise ValueError(f"dim '{self.name}': need lower < upper")
        if self.scale == "log10" and self.lower <= 0:
            raise ValueError(f"dim '{self.name}': log10 scale needs positive bounds")


@dataclass(frozen=True)
class SearchSpace:
    dims: list[Dim]

    @property
    def names(self):
        return [d.name for d in self.dims]

    def from_unit(self, u: np.ndarray) -> dict:
        """Map a point in [0,1]^d to raw parameter values."""
        params = {}
        for value, dim in zip(u, self.dims):
            if dim.scale == "log10":
                lo, hi = math.log10(dim.lower), math.log10(dim.upper)
                x = 10.0 ** (lo + float(value) * (hi - lo))
            else:
                x = dim.lower + float(value) * (dim.upper - dim.lower)
            if dim.kind == "integer":
                x = int(min(max(round(x), dim.lower), dim.upper))
            params[dim.name] = x
        return params

    def contains(self, params: dict) -> bool:
        for dim in self.dims:
            v = params[dim.name]
            if not (dim.lower <= v <= dim.upper):
                return False
            if dim.kind == "integer" and v != int(v):
                return False
        return True


@dataclass
class Trial:
    params: dict
    objective: float
    iteration: int
    failed: bool = False


class GaussianProcess:
    """Squared-exponential GP on the unit cube with fixed observation noise.

    Targets are standardized internally; the prior is zero-mean with unit
    signal variance in standardized units. No hyperparameter fitting: the
    length scale is supplied (median pairwise-distance heuristic upstream).
    """

    def __init__(self, length_scale: float, noise: float = 1e-6):
        self.length_scale = max(float(length_scale), 1e-3)
        self.noise = float(noise)
        self._U = None

    def _kernel(self, A, B):
        return np.exp(-sq_distances(A, B) / (2.0 * self.length_scale**2))

    def fit(self, U: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64)
        self._y_mean = float(y.mean())
        sd = float(y.std())
        self._y_sd = sd if sd > 0 else 1.0
        z = (y - self._y_mean) / self._y_sd
        K = self._kernel(U, U) + self.noise * np.eye(len(U))
        self._L = np.linalg.cholesky(K)
        self._alpha = np.linalg.solve(self._L.T, np.linalg.solve(self._L, z))
        self._U = U
        return self

    def predict(self, Uq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at query points (raw units)."""
        Uq = np.atleast_2d(np.asarray(Uq, dtype=np.float64))
        Ks = self._kernel(Uq, self._U)
        mean_z = Ks @ self._alpha
        V = np.linalg.solve(self._L, Ks.T)
        var_z = np.maximum(1.0 - (V**2).sum(axis=0), 0.0)
        return self._y_mean + self._y_sd * mean_z, self._y_sd * np.sqrt(var_z)


def _std_norm_cdf(z: np.ndarray) -> np.ndarray:
    return np.array([0.5 * math.erfc(-v / math.sqrt(2.0)) for v in z])


def _expected_improvement(mean, std, best):
    imp = mean - best
    out = np.maximum(imp, 0.0)
    pos = std > 0
    z = np.zeros_like(mean)
    z[pos] = imp[pos] / std[pos]
    pdf = np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)
    out[pos] = imp[pos] * _std_norm_cdf(z[pos]) + std[pos] * pdf[pos]
    return out

_N_CANDIDATES = 512
_LENGTH_SCALE_REFRESH = 10


def _median_heuristic(U: np.ndarray) -> float:
    if len(U) < 2:
        return 0.5
    d2 = sq_distances(U, U)
    tri = d2[np.triu_indices(len(U), k=1)]
    med = float(np.median(np.sqrt(tri)))
    return med if med > 0 else 0.5


def maximize(
    objective,
    space: SearchSpace,
    budget_T: int,
    rng: Rng,
    strategy: str = "gp",
    noise: float = 1e-6,
) -> tuple[Trial, list[Trial]]:
    """Run exactly `budget_T` evaluations of `objective` over `space` and
    return (best trial, full history).

    strategy "gp": the first max(10, ceil(T/10)) points are uniform, then an
    expected-improvement pick over 512 uniform candidates under a GP fit to
    all finite-objective observations; the length scale is refreshed every 10
    iterations by the median pairwise-distance heuristic. strategy "random":
    uniform throughout (bitwise reproducible given the seed).
    """
    if budget_T < 1:
        raise ValueError("budget_T must be >= 1")
    if strategy not in ("gp", "random"):
        raise ValueError(f"unknown strategy '{strategy}'")
    d = len(space.dims)
    n_init = min(budget_T, max(10, math.ceil(budget_T / 10)))

    history: list[Trial] = []
    obs_u: list[np.ndarray] = []
    obs_y: list[float] = []
    length_scale = 0.5

    for t in range(budget_T):
        use_gp = strategy == "gp" and t >= n_init and len(obs_u) >= 2
        if not use_gp:
            u = np.array(rng.random(size=d))
        else:
            U = np.stack(obs_u)
            if (t - n_init) % _LENGTH_SCALE_REFRESH == 0:
                length_scale = _median_heuristic(U)
            gp = GaussianProcess(length_scale, noise=noise).fit(U, np.array(obs_y))
            cands = np.array(rng.random(size=_N_CANDIDATES * d)).reshape(_N_CANDIDATES, d)
            mean, std = gp.predict(cands)
            ei = _expected_improvement(mean, std, max(obs_y))
            u = cands[int(np.argmax(ei))]
        params = space.from_unit(u)
        value = objective(params)
        failed = value is None or not math.isfinite(value)
        trial = Trial(params=params, objective=(-math.inf if failed else float(value)),
                      iteration=t, failed=failed)
        history.append(trial)
        if not failed:
            obs_u.append(u)
            obs_y.append(float(value))

    best_idx = int(np.argmax([tr.objective for tr in history]))
    return history[best_idx], history
