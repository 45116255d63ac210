import numpy as np
import pytest

from bitrans.linalg import SvdConvergenceError, pinv, svd_small


def test_svd_diagonal():
    u, s, v = svd_small(np.diag([3.0, 1.0]))
    assert np.allclose(s, [3.0, 1.0])


def test_svd_rank_one():
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([3.0, 4.0])
    a = np.outer(u, v)
    _, s, _ = svd_small(a)
    assert np.allclose(s[0], np.linalg.norm(u) * np.linalg.norm(v))
    assert abs(s[1]) < 1e-12


def test_svd_reconstruction_and_orthogonality():
    rng = np.random.default_rng(0)
    for _ in range(25):
        a = rng.standard_normal((rng.integers(1, 9), rng.integers(1, 9)))
        u, s, v = svd_small(a)
        assert np.linalg.norm((u * s) @ v.T - a) < 1e-9 * max(np.linalg.norm(a), 1.0)
        assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-9)
        assert np.allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-9)
        assert np.all(np.diff(s) <= 1e-15) and np.all(s >= 0)


def test_svd_matches_reference_singular_values():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.standard_normal((6, 4))
        _, s, _ = svd_small(a)
        assert np.allclose(s, np.linalg.svd(a, compute_uv=False), atol=1e-10)


def test_svd_rank_deficient_orthonormal_completion():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = int(rng.integers(1, 4))
        a = rng.standard_normal((6, p)) @ rng.standard_normal((p, 5))
        u, s, v = svd_small(a)
        assert np.linalg.norm((u * s) @ v.T - a) < 1e-9 * np.linalg.norm(a)
        assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-9)
        assert np.allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-9)


def test_svd_rejects_bad_input():
    with pytest.raises(ValueError):
        svd_small(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        svd_small(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        svd_small(np.zeros((600, 2)))


def test_pinv_invertible_matches_inverse():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(pinv(a), np.linalg.inv(a), atol=1e-10)


def test_pinv_zero_matrix():
    assert np.array_equal(pinv(np.zeros((3, 2))), np.zeros((2, 3)))


def test_pinv_rank_one_penrose():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    ap = pinv(a)
    assert np.allclose(a @ ap @ a, a, atol=1e-10)


def test_pinv_all_four_penrose_identities_rank_deficient():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = int(rng.integers(1, 3))
        a = rng.standard_normal((5, p)) @ rng.standard_normal((p, 4))
        ap = pinv(a)
        assert np.allclose(a @ ap @ a, a, atol=1e-8)
        assert np.allclose(ap @ a @ ap, ap, atol=1e-8)
        assert np.allclose((a @ ap).T, a @ ap, atol=1e-8)
        assert np.allclose((ap @ a).T, ap @ a, atol=1e-8)


def test_svd_convergence_error_type():
    assert issubclass(SvdConvergenceError, RuntimeError)
