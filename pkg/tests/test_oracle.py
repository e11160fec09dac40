import math

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_sparse
from mlmcexp.errors import DimensionError
from mlmcexp.oracle import dense_expmv, splitting_parts, strang_local_error, strang_reference
from mlmcexp.sparse import SparseMatrix, decompose, reconstruct

K2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def _rel(x, y):
    return np.max(np.abs(x - y)) / np.max(np.abs(y))


def test_zero_matrix_is_identity():
    u = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(dense_expmv(np.zeros((3, 3)), u, 5.0), u)


def test_k2_closed_form():
    x = dense_expmv(K2, np.array([1.0, 0.0]), 1.0)
    np.testing.assert_allclose(x, [math.cosh(1), math.sinh(1)], rtol=1e-12)


def test_nilpotent_series_terminates():
    n = np.triu(np.arange(1.0, 17.0).reshape(4, 4), 1)
    u = np.array([1.0, 1.0, 1.0, 1.0])
    exact = u + n @ u + n @ n @ u / 2 + n @ n @ n @ u / 6
    np.testing.assert_allclose(dense_expmv(n, u, 1.0), exact, rtol=1e-13)


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0, 100.0])
def test_matches_scipy_expm(rng, scale):
    a = random_sparse(rng, 30, density=0.2)
    u = rng.normal(size=30)
    assert _rel(dense_expmv(SparseMatrix.from_dense(a), u, scale / 10), expm(a * scale / 10) @ u) < 1e-12


def test_large_norm_decaying_operator():
    # 1D Laplacian with ||beta A||_1 = 4000
    n = 40
    a = np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    u = np.sin(np.pi * np.arange(1, n + 1) / (n + 1))
    beta = 1000.0
    lam = 2 * (1 - math.cos(math.pi / (n + 1)))
    assert _rel(dense_expmv(a, u, beta), math.exp(-lam * beta) * u) < 1e-10


def test_semigroup(rng):
    a = random_sparse(rng, 15, density=0.3)
    u = rng.normal(size=15)
    twice = dense_expmv(a, dense_expmv(a, u, 0.8), 0.8)
    assert _rel(twice, dense_expmv(a, u, 1.6)) < 1e-10


def test_size_limits():
    with pytest.raises(DimensionError):
        dense_expmv(SparseMatrix.identity(5001), np.ones(5001))
    with pytest.raises(DimensionError):
        strang_reference(decompose(SparseMatrix.identity(2001)), np.ones(2001), 1.0, 2)
    with pytest.raises(DimensionError):
        dense_expmv(np.eye(3), np.ones(4))


def test_splitting_parts_rebuild_matrix(rng):
    a = random_sparse(rng, 10, density=0.4)
    d, minus_t = splitting_parts(decompose(a))
    np.testing.assert_allclose(np.diag(d) + minus_t.to_dense(), a, atol=1e-14)


def test_strang_exact_for_diagonal():
    d = np.array([0.3, -1.0, 2.0])
    dec = decompose(np.diag(d))
    u = np.array([1.0, 2.0, 3.0])
    for n in (1, 2, 8):
        np.testing.assert_allclose(strang_reference(dec, u, 1.5, n), np.exp(1.5 * d) * u, rtol=1e-14)


def test_strang_converges_to_expm(rng):
    a = random_sparse(rng, 8, density=0.5)
    u = rng.normal(size=8)
    exact = expm(a) @ u
    dec = decompose(a)
    errs = [np.max(np.abs(strang_reference(dec, u, 1.0, n) - exact)) for n in (8, 16, 32, 64)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 4.0) < 0.3)


def test_local_error_commutator_formula(rng):
    a = random_sparse(rng, 5, density=0.8)
    dec = decompose(a)
    u = rng.normal(size=5)
    ratios = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        actual = strang_reference(dec, u, h, 1) - expm(a * h) @ u
        pred = strang_local_error(dec, u, h)
        ratios.append(np.linalg.norm(actual) / np.linalg.norm(pred))
        cos = actual @ pred / (np.linalg.norm(actual) * np.linalg.norm(pred))
    assert abs(ratios[-1] - 1.0) < 0.1
    assert cos > 0.99
    # the ratio approaches 1 as the step shrinks
    assert abs(ratios[-1] - 1.0) < abs(ratios[0] - 1.0) + 1e-3


def test_reconstruct_feeds_oracle(rng):
    a = random_sparse(rng, 6)
    u = rng.normal(size=6)
    np.testing.assert_allclose(dense_expmv(reconstruct(decompose(a)), u), expm(a) @ u, rtol=1e-12)
