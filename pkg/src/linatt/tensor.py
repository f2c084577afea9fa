"""Dense float64 matrix primitives and a seeded, portable random generator.

All values are C-contiguous (row-major) float64 ndarrays and every operation
is pure: inputs are never modified. Matrix multiplies feed the instrumentation
counters when tracking is active.
"""

import math

import numpy as np

from .errors import DimensionError, NumericError
from .instrument import active_counters

MASK64 = 0xFFFFFFFFFFFFFFFF


def as_matrix(a, name: str = "input") -> np.ndarray:
    """Validate and return `a` as a rank-2, row-major float64 array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionError(f"{name} must have rank 2, got rank {out.ndim} (shape {out.shape})")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise DimensionError(f"{name} extents must be >= 1, got shape {out.shape}")
    return out


def matmul(a, b) -> np.ndarray:
    """Matrix product. Records m*k*p MACCs and the m*p output allocation."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"inner extents differ: left {a.shape[0]}x{a.shape[1]} vs right {b.shape[0]}x{b.shape[1]}"
        )
    counters = active_counters()
    if counters is not None:
        m, k = a.shape
        p = b.shape[1]
        counters.add_macc(m * k * p)
        counters.alloc(m * p)
    return np.matmul(a, b)


def transpose(a) -> np.ndarray:
    a = as_matrix(a)
    return np.ascontiguousarray(a.T)


def softmax_rows(a) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction for overflow safety."""
    a = as_matrix(a)
    if not np.isfinite(a).all():
        raise NumericError("softmax input contains non-finite values")
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cols(a) -> np.ndarray:
    """Column-wise softmax with per-column max subtraction."""
    a = as_matrix(a)
    if not np.isfinite(a).all():
        raise NumericError("softmax input contains non-finite values")
    shifted = a - a.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def scale(a, c: float) -> np.ndarray:
    """Elementwise multiply by the scalar `c`."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if not math.isfinite(c):
        raise NumericError(f"scale factor must be finite, got {c!r}")
    return a * c


def max_relative_difference(a, b) -> float:
    """Largest elementwise |a - b| relative to the overall output magnitude.

    Normalizing by max(|a|, |b|) over the whole array keeps the metric
    meaningful when individual entries cancel to near zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare shapes {a.shape} and {b.shape}")
    denom = max(np.abs(a).max(), np.abs(b).max(), np.finfo(np.float64).tiny)
    return float(np.abs(a - b).max() / denom)


# SplitMix64 constants (Steele, Lea & Flood's finalizer).
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class Rng:
    """Counter-based SplitMix64 generator.

    Output i is mix(seed + i * golden_gamma), so a given seed yields one
    fixed scalar stream regardless of how draws are batched. All state
    transitions are 64-bit integer arithmetic, identical on every platform;
    normal variates additionally go through libm log/cos/sin and so match
    across platforms to within their last-ulp rounding.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._counter = 0

    def _next_u64(self, count: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        z = np.uint64(self.seed) + idx * _GOLDEN
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
        return z

    def _unit(self, count: int) -> np.ndarray:
        # 53-bit mantissa draw, uniform on [0, 1)
        return (self._next_u64(count) >> np.uint64(11)) * 2.0**-53

    def uniform(self, shape) -> np.ndarray:
        """Uniform on [-1, 1)."""
        shape = _check_shape(shape)
        n = math.prod(shape)
        return (2.0 * self._unit(n) - 1.0).reshape(shape)

    def normal(self, shape, sigma: float = 1.0) -> np.ndarray:
        """Normal(0, sigma^2) via Box-Muller."""
        shape = _check_shape(shape)
        n = math.prod(shape)
        pairs = (n + 1) // 2
        u1 = 1.0 - self._unit(pairs)  # (0, 1], keeps log finite
        u2 = self._unit(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return (sigma * z).reshape(shape)


def _check_shape(shape) -> tuple:
    shape = tuple(int(s) for s in np.atleast_1d(shape)) if not isinstance(shape, (tuple, list)) else tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise DimensionError("shape must have at least one extent")
    if any(s < 1 for s in shape):
        raise DimensionError(f"extents must be >= 1, got {shape}")
    return shape


def rand_tensor(rng: Rng, shape, dist: str = "uniform", sigma: float = 1.0) -> np.ndarray:
    """Deterministic random tensor; `dist` is "uniform" ([-1,1)) or "normal"."""
    if dist == "uniform":
        return rng.uniform(shape)
    if dist == "normal":
        return rng.normal(shape, sigma=sigma)
    raise ValueError(f"unknown distribution {dist!r}; expected 'uniform' or 'normal'")
