import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from fracprox.operators import (dense_matrix, grad2d, identity, mini_radon, power_norm,
                                ray_intersections, row_vector, side_of, sparse_matrix)

from oracles import chord_length, jacobi_sigma_max


def adjoint_gap(op, x, y):
    lhs = op.apply(x) @ y
    rhs = x @ op.adjoint(y)
    return abs(lhs - rhs) / (1 + np.linalg.norm(x) * np.linalg.norm(y) * op.norm_estimate)


def test_dense_identity_entries():
    K = dense_matrix(2, 2, [1, 0, 0, 1])
    assert np.array_equal(K.apply(np.array([3.0, 4.0])), [3.0, 4.0])


def test_dense_permutation_and_adjoint():
    K = dense_matrix(2, 2, [0, 1, 1, 0])
    assert np.array_equal(K(np.array([1.0, 2.0])), [2.0, 1.0])
    assert np.array_equal(K.adjoint(np.array([1.0, 0.0])), [0.0, 1.0])


def test_dense_rejects_bad_entry_count_and_shapes():
    with pytest.raises(ValueError):
        dense_matrix(2, 2, [1, 2, 3])
    K = dense_matrix(2, 3, np.arange(6.0))
    with pytest.raises(ValueError):
        K.apply(np.ones(2))
    with pytest.raises(ValueError):
        K.adjoint(np.ones(3))


@pytest.mark.parametrize("seed", range(5))
def test_power_norm_matches_jacobi_svd(seed):
    A = np.random.default_rng(seed).standard_normal((5, 3))
    K = dense_matrix(5, 3, A.ravel())
    assert K.norm_estimate == pytest.approx(jacobi_sigma_max(A), rel=1e-6)


def test_jacobi_oracle_sanity():
    assert jacobi_sigma_max(np.diag([3.0, 1.0, 2.0])) == pytest.approx(3.0, abs=1e-14)


def test_grad2d_constant_image_is_zero():
    assert np.array_equal(grad2d(4).apply(np.full(16, 5.0)), np.zeros(32))


def test_grad2d_two_by_two():
    out = grad2d(2).apply(np.array([1.0, 2.0, 3.0, 4.0]))
    gx, gy = out[:4].reshape(2, 2), out[4:].reshape(2, 2)
    assert np.array_equal(gx, [[1, 0], [1, 0]])
    assert np.array_equal(gy, [[2, 2], [0, 0]])


def test_grad2d_adjoint_identity_random_pairs():
    G = grad2d(8)
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = rng.standard_normal(64), rng.standard_normal(128)
        assert abs(G.apply(x) @ y - x @ G.adjoint(y)) <= 1e-10


def test_grad2d_norm_bound():
    G = grad2d(16)
    # sqrt(8) bounds the spectrum; the true norm approaches it from below
    assert power_norm(G.apply, G.adjoint, 256, iters=500) <= math.sqrt(8) + 1e-12
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(256)
        assert np.linalg.norm(G(x)) <= G.norm_estimate * np.linalg.norm(x) + 1e-12


def test_horizontal_ray_through_middle_row():
    # offset 0.5 hits the centre of row 3 on an 8x8 grid (rows counted from the top)
    idx, lengths = ray_intersections(8, 0.0, 0.5)
    assert sorted(idx) == list(range(24, 32))
    assert np.allclose(lengths, 1.0, atol=1e-14)
    row = np.zeros(64)
    row[idx] = lengths
    assert row.sum() == pytest.approx(8.0)


@pytest.fixture(scope="module")
def radon16():
    return mini_radon(16, 12, 150.0)


def test_radon_row_sums_bounded_by_diagonal(radon16):
    sums = np.asarray(radon16.matrix.sum(axis=1)).ravel()
    assert np.all(sums <= 16 * math.sqrt(2) + 1e-9)
    assert np.all(sums >= 0)


def test_radon_ones_image_equals_analytic_chords():
    side, na, rays = 16, 12, 23
    R = mini_radon(side, na, 150.0, rays)
    proj = R.apply(np.ones(side * side))
    diag = side * math.sqrt(2)
    offsets = (np.arange(rays) + 0.5) / rays * diag - diag / 2
    expected = [chord_length(math.radians(k * 150.0 / na), s, side / 2)
                for k in range(na + 1) for s in offsets]
    assert np.allclose(proj, expected, atol=1e-9)


def test_radon_adjoint_identity(radon16):
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.standard_normal(radon16.input_dim)
        y = rng.standard_normal(radon16.output_dim)
        assert adjoint_gap(radon16, x, y) <= 1e-10


def test_radon_rejects_tiny_grid():
    with pytest.raises(ValueError):
        mini_radon(4, 3, 90.0)


def test_row_vector_examples():
    K = row_vector([1.0, 1.0])
    assert K.apply(np.array([0.3, 0.7]))[0] == pytest.approx(1.0)
    K3 = row_vector([1.0, 2.0, 3.0])
    assert np.array_equal(K3.adjoint(np.array([2.0])), [2.0, 4.0, 6.0])


def test_row_vector_adjoint_identity():
    rng = np.random.default_rng(4)
    mu = rng.uniform(0.1, 1, 7)
    K = row_vector(mu)
    for _ in range(30):
        x, y = rng.standard_normal(7), rng.standard_normal(1)
        assert abs(K(x) @ y - x @ K.adjoint(y)) <= 1e-12


def test_sparse_and_identity_adjoints():
    rng = np.random.default_rng(5)
    S = sparse_matrix(sp.random(30, 20, density=0.2, random_state=5))
    I = identity(9)
    for op in (S, I):
        x, y = rng.standard_normal(op.input_dim), rng.standard_normal(op.output_dim)
        assert adjoint_gap(op, x, y) <= 1e-10


def test_side_of():
    assert side_of(1024) == 32
    with pytest.raises(ValueError):
        side_of(10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_dense_adjoint_property(m, n, seed):
    rng = np.random.default_rng(seed)
    K = dense_matrix(m, n, rng.standard_normal(m * n))
    x, y = rng.standard_normal(n), rng.standard_normal(m)
    assert adjoint_gap(K, x, y) <= 1e-10
    assert np.linalg.norm(K(x)) <= K.norm_estimate * np.linalg.norm(x) * (1 + 1e-6) + 1e-12
