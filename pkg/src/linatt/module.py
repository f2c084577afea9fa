"""Attention as a drop-in residual module over 2D or 3D feature maps.

Forward path: flatten the map to n x d, project to queries/keys/values with
bias-free linear layers, attend (either mechanism), reshape back, optionally
reproject to d channels with a 1x1 convolution, and add the input back as a
residual. Feature maps are plain ndarrays whose last axis is channels; the
flattening order is row-major (time-major for 3D volumes), fixed so that
serialized outputs are reproducible.
"""

import math
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from . import instrument
from .errors import DimensionError
from .instrument import capped, live
from .mechanism import (
    Mechanism,
    Normalization,
    QkvTriple,
    dot_product_attention,
    efficient_attention,
)
from .tensor import Rng, matmul

# Simulated memory cap for the quadratic path: a 12 GB accelerator budget.
DEFAULT_BUDGET_BYTES = 12 * 1024**3


@dataclass(frozen=True)
class ModuleWeights:
    """Projection weights: W_q, W_k (d x d_k), W_v (d x d_v), optional W_o (d_v x d)."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray | None = None


@dataclass(frozen=True)
class AttentionConfig:
    d_k: int
    d_v: int
    norm: Normalization = Normalization.SOFTMAX
    mechanism: Mechanism = Mechanism.EFFICIENT
    reproject: bool = True


def _check_feature_map(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim not in (3, 4):
        raise DimensionError(
            f"feature map must be h x w x d or t x h x w x d, got shape {x.shape}"
        )
    if any(s < 1 for s in x.shape):
        raise DimensionError(f"feature map extents must be >= 1, got shape {x.shape}")
    return x


def flatten(x) -> np.ndarray:
    """Flatten a feature map to an n x d matrix, positions in row-major order."""
    x = _check_feature_map(x)
    return x.reshape(-1, x.shape[-1])


def unflatten(flat, spatial) -> np.ndarray:
    """Inverse of flatten for the given spatial extents."""
    flat = np.ascontiguousarray(flat, dtype=np.float64)
    spatial = tuple(int(s) for s in spatial)
    n = math.prod(spatial)
    if flat.ndim != 2 or flat.shape[0] != n:
        raise DimensionError(f"cannot reshape {flat.shape} to spatial {spatial} positions")
    return flat.reshape(spatial + (flat.shape[1],))


def project(x_flat, w: ModuleWeights) -> QkvTriple:
    """Bias-free linear projections Q = X W_q, K = X W_k, V = X W_v."""
    return QkvTriple(matmul(x_flat, w.w_q), matmul(x_flat, w.w_k), matmul(x_flat, w.w_v))


def _check_consistency(d: int, w: ModuleWeights, cfg: AttentionConfig) -> bool:
    """Validate weight shapes against the config; returns whether W_o applies."""
    for name, mat, want in (
        ("W_q", w.w_q, (d, cfg.d_k)),
        ("W_k", w.w_k, (d, cfg.d_k)),
        ("W_v", w.w_v, (d, cfg.d_v)),
    ):
        if tuple(mat.shape) != want:
            raise DimensionError(f"{name} must have shape {want}, got {tuple(mat.shape)}")
    use_o = cfg.reproject or cfg.d_v != d
    if use_o:
        if w.w_o is None:
            raise DimensionError(
                f"reprojection weights required (d_v={cfg.d_v}, d={d}) but W_o is missing"
            )
        if tuple(w.w_o.shape) != (cfg.d_v, d):
            raise DimensionError(
                f"W_o must have shape {(cfg.d_v, d)}, got {tuple(w.w_o.shape)}"
            )
    return use_o


def module_forward(
    x,
    w: ModuleWeights,
    cfg: AttentionConfig,
    budget_bytes: int | None = DEFAULT_BUDGET_BYTES,
) -> np.ndarray:
    """Run the residual attention module on a feature map.

    Output has the input's spatial shape and channel count. For the
    dot-product mechanism the n x n buffer is charged against `budget_bytes`
    (simulated; pass None to disable the cap).
    """
    x = _check_feature_map(x)
    d = x.shape[-1]
    use_o = _check_consistency(d, w, cfg)
    spatial = x.shape[:-1]

    cap = capped(budget_bytes) if budget_bytes is not None else nullcontext()
    with cap, live(x.size):
        x_flat = flatten(x)
        t = project(x_flat, w)
        # The mechanism accounts its own inputs as live; release the
        # projection buffers here so they are not counted twice.
        instrument.free(t.q.size + t.k.size + t.v.size)
        if cfg.mechanism is Mechanism.DOT_PRODUCT:
            attended = dot_product_attention(t, cfg.norm)
        else:
            attended = efficient_attention(t, cfg.norm)
        if use_o:
            y = matmul(attended, w.w_o)
            instrument.free(attended.size)
        else:
            y = attended
        instrument.alloc(x_flat.size)
        out = x_flat + y
        instrument.free(y.size)
    return unflatten(out, spatial)


def init_weights(
    rng: Rng,
    d: int,
    d_k: int,
    d_v: int,
    scheme: str = "uniform",
    reproject: bool = True,
) -> ModuleWeights:
    """Random projection weights, deterministic per seed.

    `scheme` is "uniform" (entries in +-1/sqrt(d)) or "normal"
    (variance 1/d). W_o is generated when reprojection applies.
    """
    if scheme == "uniform":
        def draw(shape):
            return rng.uniform(shape) / math.sqrt(d)
    elif scheme == "normal":
        def draw(shape):
            return rng.normal(shape, sigma=1.0 / math.sqrt(d))
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected 'uniform' or 'normal'")
    w_q = draw((d, d_k))
    w_k = draw((d, d_k))
    w_v = draw((d, d_v))
    w_o = draw((d_v, d)) if (reproject or d_v != d) else None
    return ModuleWeights(w_q=w_q, w_k=w_k, w_v=w_v, w_o=w_o)
