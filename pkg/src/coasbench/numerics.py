"""Deterministic RNG, kernel/distance primitives, special functions and a
ridge least-squares solver shared by every other module.

Nothing here depends on anything else in the package; numpy is the only
external requirement. The special functions (erf family, regularized
incomplete gamma) are implemented in-repo so that p-values do not depend on
an external numerical library.
"""
from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(x: int) -> int:
    """SplitMix64 finalizer on a plain python int (used for seed derivation)."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _MIX1) & MASK64
    x ^= x >> 27
    x = (x * _MIX2) & MASK64
    return x ^ (x >> 31)


def _key_words(key) -> list[int]:
    # Strings are folded into 64-bit little-endian words; ints pass through.
    # Never uses python's hash(), which is salted per process.
    if isinstance(key, (int, np.integer)):
        return [int(key) & MASK64]
    if isinstance(key, str):
        raw = key.encode("utf-8")
        words = [len(raw) & MASK64]
        for i in range(0, len(raw), 8):
            words.append(int.from_bytes(raw[i : i + 8], "little"))
        return words
    raise TypeError(f"rng keys must be int or str, got {type(key).__name__}")


def derive_seed(seed: int, *keys) -> int:
    """Deterministically derive a 64-bit seed from a root seed and keys."""
    h = _mix64(int(seed) & MASK64)
    for key in keys:
        for w in _key_words(key):
            h = _mix64(h ^ _mix64((w + _GOLDEN) & MASK64))
    return h


class Rng:
    """Counter-based 64-bit generator (SplitMix64 output stream).

    output[i] = mix64(seed + (i+1) * golden_gamma). The counter advances by
    the number of values drawn, so a given seed yields a bitwise-identical
    stream on any platform, and batch draws are interchangeable with repeated
    scalar draws. Instances are single-owner: callers that need parallel
    streams derive children with :meth:`spawn`.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._ctr = 0

    def _raw(self, n: int) -> np.ndarray:
        c = np.arange(self._ctr + 1, self._ctr + n + 1, dtype=np.uint64)
        self._ctr += n
        x = np.uint64(self.seed) + c * np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
        return x ^ (x >> np.uint64(31))

    def spawn(self, *keys) -> "Rng":
        """Child generator; a pure function of (seed, keys), not of draws made."""
        return Rng(derive_seed(self.seed, *keys))

    # ------------------------------------------------------------------ draws

    def random(self, size: int | None = None):
        """Uniform floats in [0, 1) with 53-bit resolution."""
        out = (self._raw(1 if size is None else int(size)) >> np.uint64(11)).astype(
            np.float64
        ) * 2.0**-53
        return float(out[0]) if size is None else out

    def integers(self, low: int, high: int, size: int | None = None):
        """Uniform integers in the half-open range [low, high)."""
        span = int(high) - int(low)
        if span <= 0:
            raise ValueError(f"empty integer range [{low}, {high})")
        raw = self._raw(1 if size is None else int(size)) % np.uint64(span)
        out = raw.astype(np.int64) + int(low)
        return int(out[0]) if size is None else out

    def normal(self, size: int | None = None):
        """Standard normal draws (Box-Muller on uniform pairs)."""
        n = 1 if size is None else int(size)
        m = (n + 1) // 2
        u1 = ((self._raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (self._raw(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return float(z[0]) if size is None else z

    def permutation(self, n: int) -> np.ndarray:
        # argsort of 64-bit keys; key collisions are ~n^2 / 2^65, negligible.
        return np.argsort(self._raw(int(n)), kind="stable")

    def choice(self, n: int, size: int, p: np.ndarray | None = None) -> np.ndarray:
        """`size` indices drawn with replacement from range(n), optionally weighted."""
        if p is None:
            return self.integers(0, n, size=size)
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (n,):
            raise ValueError("p must have shape (n,)")
        total = p.sum()
        if not np.isfinite(total) or total <= 0 or (p < 0).any():
            raise ValueError("p must be nonnegative with positive finite sum")
        cdf = np.cumsum(p / total)
        cdf[-1] = 1.0
        u = self.random(size=size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), n - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# Kernels / distances
# ---------------------------------------------------------------------------


def sq_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(X), len(Y)).

    Computed from explicit differences (not the expanded dot-product form) so
    identical rows give exactly 0.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError("X and Y must be 2-D with the same number of columns")
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2) for two vectors; 1.0 exactly when x == y."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d2 = float(((x - y) ** 2).sum())
    return math.exp(-gamma * d2)


def rbf_kernel_matrix(X: np.ndarray, P: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel design matrix K[i, j] = exp(-gamma * ||X_i - P_j||^2)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return np.exp(-gamma * sq_distances(X, P))


# ---------------------------------------------------------------------------
# Ridge least squares
# ---------------------------------------------------------------------------

RIDGE_FALLBACK = 1e-8


def ridge_least_squares(A: np.ndarray, b: np.ndarray, lambda_reg: float = 0.0) -> np.ndarray:
    """argmin_w ||A w - b||^2 + lambda_reg ||w||^2 via the normal equations.

    b may be a vector or a matrix of stacked right-hand sides (one column per
    target); the result then has one column of weights per target. A singular
    or non-positive-definite system falls back to ridge 1e-8, which is the
    intended path for duplicate rows produced by with-replacement sampling.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not np.isfinite(A).all() or not np.isfinite(b).all():
        raise ValueError("non-finite entries in least-squares system")
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be nonnegative")
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("A must be a nonempty 2-D matrix")
    squeeze = b.ndim == 1
    B = b[:, None] if squeeze else b
    if B.shape[0] != A.shape[0]:
        raise ValueError("row count mismatch between A and b")

    m = A.shape[1]
    G = A.T @ A
    rhs = A.T @ B
    for lam in (lambda_reg, lambda_reg + RIDGE_FALLBACK):
        try:
            L = np.linalg.cholesky(G + lam * np.eye(m))
        except np.linalg.LinAlgError:
            continue
        W = _cho_solve(L, rhs)
        return W[:, 0] if squeeze else W
    raise np.linalg.LinAlgError("normal equations not positive definite even with ridge fallback")


def _cho_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(L, B)
    return np.linalg.solve(L.T, y)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 500


def _gamma_p_series(a: float, x: float) -> float:
    # Lower regularized gamma by power series; valid for x < a + 1.
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float) -> float:
    # Upper regularized gamma by Lentz continued fraction; valid for x >= a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def erf(x: float) -> float:
    if x == 0.0:
        return 0.0
    v = gamma_p(0.5, x * x)
    return v if x > 0 else -v


def erfc(x: float) -> float:
    if x >= 0:
        return gamma_q(0.5, x * x) if x > 0 else 1.0
    return 2.0 - erfc(-x)


_SQRT2 = math.sqrt(2.0)


def normal_sf(z: float) -> float:
    """Standard normal survival function 1 - Phi(z)."""
    if not math.isfinite(z):
        raise ValueError("z must be finite")
    return 0.5 * erfc(z / _SQRT2)


def chi2_sf(x: float, df: int) -> float:
    """Chi-square survival function with `df` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return gamma_q(df / 2.0, x / 2.0)
