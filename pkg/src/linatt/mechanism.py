"""The two attention mechanisms and their interpretation artifacts.

Dot-product attention forms the full n x n position-similarity matrix
S = Q K^T, normalizes it, and aggregates the values:

    out = rho(Q K^T) V

The efficient mechanism normalizes Q and K separately and reassociates the
product so no n x n matrix ever exists:

    out = rho_q(Q) (rho_k(K)^T V)

With scaling normalization (divide S by n, or Q and K each by sqrt(n)) the
two are the same function of (Q, K, V); with softmax normalization the
efficient form is a close approximation whose implied mixing matrix is still
row-stochastic.
"""

import math
from contextlib import nullcontext
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError
from .instrument import capped, free, live
from .tensor import as_matrix, matmul, scale, softmax_cols, softmax_rows, transpose


class Normalization(Enum):
    SCALING = "scaling"
    SOFTMAX = "softmax"


class Mechanism(Enum):
    EFFICIENT = "efficient"
    DOT_PRODUCT = "dot_product"


@dataclass(frozen=True)
class QkvTriple:
    """Queries, keys, and values for n positions.

    Q and K must share their feature extent d_k; all three share n.
    """

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_matrix(self.q, "Q"))
        object.__setattr__(self, "k", as_matrix(self.k, "K"))
        object.__setattr__(self, "v", as_matrix(self.v, "V"))
        if self.q.shape[1] != self.k.shape[1]:
            raise DimensionError(
                f"Q and K feature extents differ: Q {self.q.shape} vs K {self.k.shape}"
            )
        if not (self.q.shape[0] == self.k.shape[0] == self.v.shape[0]):
            raise DimensionError(
                f"Q, K, V must share their first extent: "
                f"{self.q.shape}, {self.k.shape}, {self.v.shape}"
            )

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def d_k(self) -> int:
        return self.q.shape[1]

    @property
    def d_v(self) -> int:
        return self.v.shape[1]


def dot_product_attention(
    t: QkvTriple, norm: Normalization, budget_bytes: int | None = None
) -> np.ndarray:
    """Quadratic-memory attention: rho(Q K^T) V.

    When `budget_bytes` is given, the pending n x n buffer is charged against
    it (at 8 bytes per scalar) before being materialized.
    """
    n = t.n
    cap = capped(budget_bytes) if budget_bytes is not None else nullcontext()
    with cap, live(t.q.size + t.k.size + t.v.size):
        s = matmul(t.q, transpose(t.k))
        if norm is Normalization.SCALING:
            s = scale(s, 1.0 / n)
        else:
            s = softmax_rows(s)
        out = matmul(s, t.v)
        free(n * n)
    return out


def efficient_attention(t: QkvTriple, norm: Normalization) -> np.ndarray:
    """Linear-memory attention: rho_q(Q) (rho_k(K)^T V).

    The largest intermediate is the d_k x d_v context matrix; nothing scales
    with n^2.
    """
    with live(t.q.size + t.k.size + t.v.size):
        if norm is Normalization.SCALING:
            f = 1.0 / math.sqrt(t.n)
            qn = scale(t.q, f)
            kn = scale(t.k, f)
        else:
            qn = softmax_rows(t.q)
            kn = softmax_cols(t.k)
        g = matmul(transpose(kn), t.v)
        out = matmul(qn, g)
        free(t.d_k * t.d_v)
    return out


def effective_attention_matrix(q, k, norm: Normalization) -> np.ndarray:
    """The n x n position-mixing matrix implied by the efficient mechanism.

    Scaling: (Q/sqrt(n)) (K/sqrt(n))^T == Q K^T / n. Softmax: the product of
    the row-softmaxed queries with the column-softmaxed keys, which is
    row-stochastic. Quadratic in n; intended for tests and inspection only.
    """
    q = as_matrix(q, "Q")
    k = as_matrix(k, "K")
    if q.shape[1] != k.shape[1] or q.shape[0] != k.shape[0]:
        raise DimensionError(f"Q {q.shape} and K {k.shape} must share both extents")
    if norm is Normalization.SCALING:
        f = 1.0 / math.sqrt(q.shape[0])
        return matmul(scale(q, f), transpose(scale(k, f)))
    return matmul(softmax_rows(q), transpose(softmax_cols(k)))


def global_context(k, v, norm: Normalization) -> np.ndarray:
    """Aggregate values into d_k global context vectors: rho_k(K)^T V.

    Row j is the value summary collected by the j-th template attention map.
    """
    k = as_matrix(k, "K")
    v = as_matrix(v, "V")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"K {k.shape} and V {v.shape} must share their first extent")
    return matmul(template_attention_maps(k, norm), v)


def template_attention_maps(k, norm: Normalization) -> np.ndarray:
    """The keys read as d_k weightings over all n positions: rho_k(K)^T.

    Under softmax normalization each row is a distribution over positions.
    """
    k = as_matrix(k, "K")
    if norm is Normalization.SCALING:
        return transpose(scale(k, 1.0 / math.sqrt(k.shape[0])))
    return transpose(softmax_cols(k))


def pairwise_similarity(q, k) -> np.ndarray:
    """Raw similarities S = Q K^T between every query and key position.

    Asymmetric in general: entry (i, j) is q_i . k_j.
    """
    q = as_matrix(q, "Q")
    k = as_matrix(k, "K")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"Q {q.shape} and K {k.shape} must share their feature extent")
    return matmul(q, transpose(k))


def softmax_approximation_gap(q, k) -> float:
    """Frobenius distance between the two softmax mixing matrices.

    Measures how far softmax_rows(Q) softmax_cols(K)^T is from
    softmax_rows(Q K^T). Reported empirically; no bound is asserted.
    """
    exact = softmax_rows(pairwise_similarity(q, k))
    approx = effective_attention_matrix(q, k, Normalization.SOFTMAX)
    return float(np.linalg.norm(exact - approx))
