import math

import numpy as np
import pytest

from linatt.errors import DimensionError, NumericError
from linatt.tensor import (
    Rng,
    matmul,
    max_relative_difference,
    rand_tensor,
    scale,
    softmax_cols,
    softmax_rows,
    transpose,
)


def matmul_reference(a, b):
    """Triple-loop oracle, independent of any BLAS path."""
    m, k = a.shape
    k2, p = b.shape
    assert k == k2
    out = np.zeros((m, p))
    for i in range(m):
        for j in range(p):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def test_matmul_identity():
    a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
    assert np.array_equal(matmul(np.eye(3), a), a)


def test_matmul_zero_annihilator():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    z = np.zeros((2, 1))
    assert np.array_equal(matmul(a, z), np.zeros((2, 1)))


def test_matmul_matches_triple_loop():
    rng = Rng(101)
    a = rng.uniform((3, 4))
    b = rng.uniform((4, 2))
    got = matmul(a, b)
    want = matmul_reference(a, b)
    assert np.allclose(got, want, rtol=0, atol=1e-14)


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match="2x3.*4x2"):
        matmul(np.ones((2, 3)), np.ones((4, 2)))


def test_matmul_associative_within_tolerance():
    rng = Rng(55)
    for _ in range(20):
        a = rng.uniform((5, 7))
        b = rng.uniform((7, 3))
        c = rng.uniform((3, 6))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        bound = 1e-10 * abs(a).max() * abs(b).max() * abs(c).max()
        assert np.abs(left - right).max() <= bound


def test_transpose_examples():
    assert np.array_equal(transpose([[1.0, 2.0, 3.0]]), [[1.0], [2.0], [3.0]])
    rng = Rng(3)
    a = rng.uniform((4, 6))
    assert np.array_equal(transpose(transpose(a)), a)


def test_transpose_matches_index_swap():
    rng = Rng(4)
    a = rng.uniform((5, 3))
    got = transpose(a)
    for i in range(5):
        for j in range(3):
            assert got[j, i] == a[i, j]


def test_transpose_rejects_non_matrices():
    with pytest.raises(DimensionError, match="rank"):
        transpose(np.ones((2, 2, 2)))


def test_softmax_rows_uniform_case():
    assert np.allclose(softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]], atol=1e-15)


def test_softmax_rows_large_inputs_shift_safely():
    # exp(1000) would overflow without max subtraction; shifted values are
    # exp(0)=1 and exp(ln 2)=2, normalizing to 1/3 and 2/3
    out = softmax_rows([[1000.0, 1000.0 + math.log(2.0)]])
    assert np.allclose(out, [[1.0 / 3.0, 2.0 / 3.0]], atol=1e-15)


def test_softmax_rows_rows_sum_to_one():
    rng = Rng(9)
    a = 5.0 * rng.uniform((4, 4))
    out = softmax_rows(a)
    assert np.all(out > 0.0)
    assert np.all(out < 1.0)
    assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-12


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        softmax_rows([[1.0, math.inf]])
    with pytest.raises(NumericError):
        softmax_cols([[math.nan], [0.0]])


def test_softmax_cols_examples():
    assert np.allclose(softmax_cols([[0.0], [0.0]]), [[0.5], [0.5]], atol=1e-15)
    rng = Rng(11)
    a = rng.uniform((4, 4))
    assert np.allclose(softmax_cols(a), transpose(softmax_rows(transpose(a))), atol=1e-15)
    assert np.abs(softmax_cols(a).sum(axis=0) - 1.0).max() <= 1e-12


def test_scale_examples():
    a = np.array([[2.0, 4.0]])
    assert np.array_equal(scale(a, 1.0), a)
    assert np.array_equal(scale(a, 0.5), [[1.0, 2.0]])


def test_scale_rejects_non_finite_factor():
    with pytest.raises(NumericError):
        scale(np.ones((2, 2)), math.inf)


def test_repeated_sqrt_scaling_equals_single_scaling():
    rng = Rng(12)
    a = rng.uniform((6, 6))
    for n in (2, 5, 9, 64):
        twice = scale(scale(a, 1.0 / math.sqrt(n)), 1.0 / math.sqrt(n))
        once = scale(a, 1.0 / n)
        assert np.abs(twice - once).max() <= 1e-15


def test_operations_do_not_modify_inputs():
    rng = Rng(13)
    a = rng.uniform((4, 5))
    b = rng.uniform((5, 2))
    a0, b0 = a.copy(), b.copy()
    matmul(a, b)
    transpose(a)
    softmax_rows(a)
    softmax_cols(a)
    scale(a, 3.0)
    assert np.array_equal(a, a0)
    assert np.array_equal(b, b0)


def test_rng_same_seed_bitwise_identical():
    a = rand_tensor(Rng(42), (10, 10))
    b = rand_tensor(Rng(42), (10, 10))
    assert np.array_equal(a, b)


def test_rng_different_seeds_differ():
    a = rand_tensor(Rng(42), (10, 10))
    b = rand_tensor(Rng(43), (10, 10))
    assert np.any(a != b)


def test_rng_draws_advance_state():
    rng = Rng(42)
    assert np.any(rng.uniform((8,)) != rng.uniform((8,)))


def test_rng_rejects_empty_or_bad_shapes():
    with pytest.raises(DimensionError):
        rand_tensor(Rng(1), ())
    with pytest.raises(DimensionError):
        rand_tensor(Rng(1), (3, 0))


def test_normal_moments_at_large_sample():
    # law-of-large-numbers bounds at 1e5 samples: sd(mean) ~ 0.003
    z = rand_tensor(Rng(2024), (100_000,), dist="normal")
    assert abs(z.mean()) <= 0.02
    assert abs(z.var() - 1.0) <= 0.05


def test_uniform_range():
    u = rand_tensor(Rng(77), (10_000,))
    assert u.min() >= -1.0
    assert u.max() < 1.0


def test_max_relative_difference_basics():
    a = np.array([[1.0, 2.0]])
    assert max_relative_difference(a, a) == 0.0
    assert max_relative_difference(a, np.array([[1.0, 2.002]])) == pytest.approx(0.002 / 2.002)
    with pytest.raises(DimensionError):
        max_relative_difference(a, np.ones((2, 2)))
