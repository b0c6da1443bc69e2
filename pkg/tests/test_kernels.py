import numpy as np
import pytest

from frtsvm.kernels import (
    FactorizationError,
    KernelSpec,
    build_augmented,
    build_q_factor,
    gaussian_kernel,
    gram,
    spd_solve_factor,
)

E_INV = 0.367879441171442322  # exp(-1)


def test_gaussian_kernel_values():
    assert gaussian_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    assert gaussian_kernel([0.0, 0.0], [0.6, 0.8], 1.0) == pytest.approx(E_INV, abs=1e-15)
    assert gaussian_kernel([0.0, 0.0], [3.0, 4.0], 5.0) == pytest.approx(E_INV, abs=1e-15)
    assert abs(gaussian_kernel([0.0], [5.0], 1e6) - 1.0) < 1e-6
    with pytest.raises(ValueError, match="dimension"):
        gaussian_kernel([0.0], [1.0, 2.0], 1.0)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("poly")
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0)


def test_gram_blocks():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(3, 2)), rng.normal(size=(4, 2))
    np.testing.assert_allclose(gram(A, B, KernelSpec("linear")), A @ B.T)
    K = gram(A, B, KernelSpec("gaussian", 0.8))
    assert K.shape == (3, 4)
    assert K[0, 0] == pytest.approx(gaussian_kernel(A[0], B[0], 0.8), rel=1e-12)
    assert K[2, 3] == pytest.approx(gaussian_kernel(A[2], B[3], 0.8), rel=1e-12)
    S = gram(A, A, KernelSpec("gaussian", 0.8))
    np.testing.assert_array_equal(np.diag(S), 1.0)
    np.testing.assert_array_equal(S, S.T)
    with pytest.raises(ValueError):
        gram(A, rng.normal(size=(2, 3)), KernelSpec("gaussian"))


def test_build_augmented():
    H = build_augmented(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(H, [[1, 2, 1], [3, 4, 1]])
    assert build_augmented(np.zeros((7, 5))).shape == (7, 6)


def test_identity_factor_reproduces_rhs():
    f = spd_solve_factor(np.eye(4), 0.0)
    rhs = np.arange(8.0).reshape(4, 2)
    np.testing.assert_allclose(f.solve(rhs), rhs)
    assert f.jitter == 0.0


def test_singular_needs_jitter():
    M = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    H = build_augmented(M)
    H[:, -1] = 0.0  # the bias column carries nothing and E leaves it unregularized
    f = spd_solve_factor(H.T @ H, 0.5, reg_bias=False)
    assert f.jitter > 0


def test_unfactorizable_raises():
    with pytest.raises(FactorizationError):
        spd_solve_factor(np.zeros((3, 3)), 0.0, jitter_schedule=(0.0,))


def test_solve_residual():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(20, 6))
    f = spd_solve_factor(M.T @ M, 0.3)
    rhs = rng.normal(size=(6, 3))
    x = f.solve(rhs)
    assert np.linalg.norm(f.matrix @ x - rhs) <= 1e-8 * np.linalg.norm(rhs)
    E = np.diag([1, 1, 1, 1, 1, 0.0])
    np.testing.assert_allclose(f.matrix, M.T @ M + 0.3 * E + f.jitter * np.eye(6))


def test_q_factor_dense_cross_check():
    rng = np.random.default_rng(3)
    G_own, G_other = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
    qf = build_q_factor(G_own, G_other, 0.2)
    inner = G_own.T @ G_own + 0.2 * np.diag([1.0] * 7 + [0.0]) + qf.jitter * np.eye(8)
    dense = G_other @ np.linalg.solve(inner, G_other.T)
    np.testing.assert_allclose(qf.qbar_diag, np.diag(dense), rtol=1e-9)
    np.testing.assert_allclose(qf.dense_qbar(), dense, rtol=1e-8, atol=1e-10)


def test_q_factor_shapes_and_scaling():
    rng = np.random.default_rng(4)
    G_own = rng.normal(size=(5, 3))
    row = rng.normal(size=(1, 3))
    qf = build_q_factor(G_own, row, 1.0)
    assert qf.Q.shape == (3, 1)
    assert qf.qbar_diag[0] == pytest.approx(float(row[0] @ qf.Q[:, 0]))
    G_other = rng.normal(size=(4, 3))
    a = build_q_factor(G_own, G_other, 1.0)
    b = build_q_factor(G_own, 2 * G_other, 1.0)
    np.testing.assert_allclose(b.qbar_diag, 4 * a.qbar_diag, rtol=1e-12)
    with pytest.raises(ValueError):
        build_q_factor(G_own, rng.normal(size=(2, 4)), 1.0)
