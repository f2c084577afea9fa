import numpy as np
import pytest

from linatt.errors import DimensionError
from linatt.mechanism import (
    Normalization,
    QkvTriple,
    dot_product_attention,
    effective_attention_matrix,
    efficient_attention,
    global_context,
    pairwise_similarity,
    softmax_approximation_gap,
    template_attention_maps,
)
from linatt.tensor import Rng, matmul, max_relative_difference, softmax_rows, transpose

SCALING = Normalization.SCALING
SOFTMAX = Normalization.SOFTMAX


def softmax_attention_reference(q, k, v):
    """Per-position loop oracle: softmax weights over keys, then weighted sum."""
    n, d_v = q.shape[0], v.shape[1]
    out = np.zeros((n, d_v))
    for i in range(n):
        logits = np.array([float(q[i] @ k[j]) for j in range(n)])
        w = np.exp(logits - logits.max())
        w /= w.sum()
        for j in range(n):
            out[i] += w[j] * v[j]
    return out


def random_triple(rng, n, d_k, d_v, span=1.0):
    return QkvTriple(
        span * rng.uniform((n, d_k)),
        span * rng.uniform((n, d_k)),
        span * rng.uniform((n, d_v)),
    )


def test_triple_validates_shapes():
    with pytest.raises(DimensionError):
        QkvTriple(np.ones((3, 2)), np.ones((3, 4)), np.ones((3, 5)))
    with pytest.raises(DimensionError):
        QkvTriple(np.ones((3, 2)), np.ones((4, 2)), np.ones((3, 5)))
    with pytest.raises(DimensionError):
        QkvTriple(np.ones((0, 2)), np.ones((0, 2)), np.ones((0, 5)))


def test_zero_values_give_zero_output():
    rng = Rng(1)
    q, k = rng.uniform((5, 3)), rng.uniform((5, 3))
    t = QkvTriple(q, k, np.zeros((5, 2)))
    for norm in (SCALING, SOFTMAX):
        assert np.array_equal(dot_product_attention(t, norm), np.zeros((5, 2)))
        assert np.array_equal(efficient_attention(t, norm), np.zeros((5, 2)))


def test_single_position_scaling_is_plain_product():
    t = QkvTriple([[2.0]], [[3.0]], [[5.0]])
    assert np.allclose(dot_product_attention(t, SCALING), [[30.0]], atol=1e-14)
    assert np.allclose(efficient_attention(t, SCALING), [[30.0]], atol=1e-14)


def test_dot_product_softmax_matches_loop_oracle():
    rng = Rng(6)
    t = random_triple(rng, 6, 2, 3)
    got = dot_product_attention(t, SOFTMAX)
    want = softmax_attention_reference(t.q, t.k, t.v)
    assert np.abs(got - want).max() <= 1e-12


def test_mechanisms_agree_under_scaling():
    rng = Rng(8)
    t = random_triple(rng, 8, 3, 4)
    diff = max_relative_difference(
        efficient_attention(t, SCALING), dot_product_attention(t, SCALING)
    )
    assert diff <= 1e-10


def test_scaling_equivalence_across_random_sizes():
    rng = Rng(77)
    size_rng = Rng(78)
    for _ in range(100):
        pick = size_rng.uniform((3,))
        n = 1 + int((pick[0] + 1.0) / 2.0 * 63)
        d_k = 1 + int((pick[1] + 1.0) / 2.0 * 15)
        d_v = 1 + int((pick[2] + 1.0) / 2.0 * 15)
        t = random_triple(rng, n, d_k, d_v, span=2.0)
        diff = max_relative_difference(
            efficient_attention(t, SCALING), dot_product_attention(t, SCALING)
        )
        assert diff <= 1e-10, (n, d_k, d_v, diff)


def test_efficient_softmax_mixing_rows_sum_to_one():
    rng = Rng(10)
    t = random_triple(rng, 8, 3, 2)
    m = effective_attention_matrix(t.q, t.k, SOFTMAX)
    assert np.abs(m.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.all(m >= 0.0)


def test_effective_matrix_scaling_is_similarity_over_n():
    rng = Rng(12)
    q, k = rng.uniform((7, 3)), rng.uniform((7, 3))
    m = effective_attention_matrix(q, k, SCALING)
    want = matmul(q, transpose(k)) / 7.0
    assert np.abs(m - want).max() <= 1e-15


def test_effective_matrix_single_position_softmax():
    m = effective_attention_matrix([[0.3, -1.2]], [[0.7, 0.1]], SOFTMAX)
    assert np.allclose(m, [[1.0]], atol=1e-15)


def test_effective_matrix_row_stochastic_many_instances():
    rng = Rng(13)
    for _ in range(100):
        q = 2.0 * rng.uniform((6, 4))
        k = 2.0 * rng.uniform((6, 4))
        m = effective_attention_matrix(q, k, SOFTMAX)
        assert np.abs(m.sum(axis=1) - 1.0).max() <= 1e-12
        assert np.all(m >= 0.0)


def test_efficient_softmax_output_is_effective_matrix_times_values():
    rng = Rng(14)
    t = random_triple(rng, 8, 3, 4)
    out = efficient_attention(t, SOFTMAX)
    m = effective_attention_matrix(t.q, t.k, SOFTMAX)
    assert np.abs(out - matmul(m, t.v)).max() <= 1e-12


def test_global_context_zero_values():
    rng = Rng(15)
    k = rng.uniform((6, 3))
    for norm in (SCALING, SOFTMAX):
        assert np.array_equal(global_context(k, np.zeros((6, 2)), norm), np.zeros((3, 2)))


def test_global_context_constant_values_under_softmax():
    # column-stochastic weights over a constant value column aggregate to 1
    rng = Rng(16)
    k = rng.uniform((9, 4))
    v = np.ones((9, 1))
    g = global_context(k, v, SOFTMAX)
    assert np.abs(g - 1.0).max() <= 1e-12


def test_efficient_attention_decomposes_through_global_context():
    rng = Rng(17)
    t = random_triple(rng, 7, 3, 2)
    for norm in (SCALING, SOFTMAX):
        if norm is SCALING:
            q_norm = t.q / np.sqrt(t.n)
        else:
            q_norm = softmax_rows(t.q)
        composed = matmul(q_norm, global_context(t.k, t.v, norm))
        assert np.abs(composed - efficient_attention(t, norm)).max() <= 1e-15


def test_template_maps_are_distributions_under_softmax():
    rng = Rng(18)
    k = rng.uniform((10, 5))
    maps = template_attention_maps(k, SOFTMAX)
    assert maps.shape == (5, 10)
    assert np.abs(maps.sum(axis=1) - 1.0).max() <= 1e-12


def test_template_map_constant_column_is_uniform():
    rng = Rng(19)
    k = rng.uniform((8, 3))
    k[:, 1] = 0.25
    maps = template_attention_maps(k, SOFTMAX)
    assert np.abs(maps[1] - 1.0 / 8.0).max() <= 1e-15


def test_template_maps_scaling_is_transposed_keys():
    rng = Rng(20)
    k = rng.uniform((6, 3))
    assert np.allclose(template_attention_maps(k, SCALING), k.T / np.sqrt(6.0), rtol=0, atol=1e-15)


def test_pairwise_similarity_identity_for_orthonormal_rows():
    q = np.eye(4)
    assert np.array_equal(pairwise_similarity(q, q), np.eye(4))


def test_pairwise_similarity_is_q_times_k_transposed():
    rng = Rng(21)
    q, k = rng.uniform((5, 3)), rng.uniform((5, 3))
    assert np.array_equal(pairwise_similarity(q, k), matmul(q, transpose(k)))


def test_pairwise_similarity_is_asymmetric_in_general():
    rng = Rng(22)
    q, k = rng.uniform((5, 3)), rng.uniform((5, 3))
    s = pairwise_similarity(q, k)
    found = any(
        s[i, j] != s[j, i] for i in range(5) for j in range(5) if i != j
    )
    assert found


def test_permuting_positions_permutes_outputs():
    rng = Rng(23)
    t = random_triple(rng, 9, 3, 4)
    perm = np.array([4, 0, 7, 2, 8, 1, 6, 3, 5])
    permuted = QkvTriple(t.q[perm], t.k[perm], t.v[perm])
    for norm in (SCALING, SOFTMAX):
        for fn in (dot_product_attention, efficient_attention):
            base = fn(t, norm)
            moved = fn(permuted, norm)
            assert np.abs(moved - base[perm]).max() <= 1e-12


def test_softmax_outputs_stay_within_value_range():
    rng = Rng(24)
    lo, hi = 0.25, 2.75
    q, k = rng.uniform((8, 3)), rng.uniform((8, 3))
    v = lo + (hi - lo) * (rng.uniform((8, 4)) + 1.0) / 2.0
    t = QkvTriple(q, k, v)
    for fn in (dot_product_attention, efficient_attention):
        out = fn(t, SOFTMAX)
        assert out.min() >= lo - 1e-12
        assert out.max() <= hi + 1e-12


def test_softmax_gap_is_nonzero_but_reported():
    rng = Rng(25)
    q, k = rng.uniform((8, 3)), rng.uniform((8, 3))
    gap = softmax_approximation_gap(q, k)
    assert gap > 0.0
    assert np.isfinite(gap)
