import numpy as np
import pytest

from frtsvm.data import Dataset, gen_ripley_mixture
from frtsvm.kernels import KernelSpec, gram
from frtsvm.membership import (
    MembershipParams,
    class_centers_input,
    class_radii_input,
    kernel_sq_dist_to_center,
    kernel_sq_dists,
    membership_kernel,
    membership_linear,
)

# 0.9 * (1 - (2/3) / (sqrt(10)/3 + 0.001)), evaluated at 30 digits with mpmath
S_HAND = 0.331329509366250158


def hand_set():
    X = np.array([[0, 0], [2, 0], [1, 1], [10, 0]], dtype=float)
    return Dataset(X, [1, 1, 1, -1])


def test_centers():
    cp, cm = class_centers_input([[0, 0], [2, 0]], [[5, 5]])
    np.testing.assert_array_equal(cp, [1, 0])
    np.testing.assert_array_equal(cm, [5, 5])
    cp, _ = class_centers_input([[0, 0], [2, 0], [1, 1]], [[9, 9]])
    np.testing.assert_allclose(cp, [1, 1 / 3])
    with pytest.raises(ValueError):
        class_centers_input(np.empty((0, 2)), [[1, 1]])


def test_radii():
    assert class_radii_input([[0, 0], [2, 0]], np.array([1, 0])) == 1.0
    assert class_radii_input([[3, 4]], np.array([3, 4])) == 0.0
    r = class_radii_input([[0, 0], [2, 0], [1, 1]], np.array([1, 1 / 3]))
    assert r == pytest.approx(np.sqrt(10) / 3, abs=1e-12)


def test_hand_example():
    mv = membership_linear(hand_set(), MembershipParams(0.1, 0.001))
    assert mv.s_plus[2] == pytest.approx(S_HAND, abs=1e-9)


def test_at_own_center():
    X = np.array([[-1, 0], [1, 0], [0, 0], [10, 0], [12, 0]], dtype=float)
    mv = membership_linear(Dataset(X, [1, 1, 1, -1, -1]))
    assert mv.s_plus[2] == pytest.approx(0.9)


def test_at_radius_in_outlier_branch():
    # (4, 0) is the farthest positive and closer to the negative center
    X = np.array([[0, 0], [0.5, 0], [4, 0], [6, 0], [7, 0]], dtype=float)
    p = MembershipParams(0.1, 0.001)
    mv = membership_linear(Dataset(X, [1, 1, 1, -1, -1]), p)
    center = X[:3].mean(axis=0)
    r = np.linalg.norm(X[2] - center)
    assert mv.s_plus[2] == pytest.approx(0.1 * 0.001 / (r + 0.001), rel=1e-12)


def test_equidistant_takes_mu_branch():
    # mirror-image classes, so the origin is equidistant from both centers
    X = np.array([[-1, 1], [-1, -1], [1, 1], [1, -1], [0, 0], [0, 0]], dtype=float)
    y = [1, 1, -1, -1, 1, -1]
    mv = membership_linear(Dataset(X, y), MembershipParams(0.3, 1.0))
    cp, cm = X[[0, 1, 4]].mean(0), X[[2, 3, 5]].mean(0)
    d = np.linalg.norm(X[4] - cp)
    assert np.linalg.norm(X[4] - cm) == pytest.approx(d)
    r = max(np.linalg.norm(X[[0, 1, 4]] - cp, axis=1))
    assert mv.s_plus[2] == pytest.approx(0.3 * (1 - d / (r + 1.0)))


def test_bounds_hold_for_random_data():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu = rng.uniform(0, 1)
        X = rng.normal(size=(30, 3))
        y = np.where(rng.uniform(size=30) < 0.5, 1, -1)
        y[:2] = [1, -1]
        mv = membership_linear(Dataset(X, y), MembershipParams(mu, 1e-3))
        s = np.concatenate([mv.s_plus, mv.s_minus])
        assert np.all(np.isfinite(s))
        assert np.all(s > 0) or mu == 0
        assert np.all(s <= max(mu, 1 - mu) + 1e-15)


def test_kernel_sq_dist_examples():
    K = gram(np.array([[0.0, 0.0], [0.3, 0.4]]), np.array([[0.0, 0.0], [0.3, 0.4]]),
             KernelSpec("gaussian", 1.0))
    assert kernel_sq_dist_to_center(0, [0], K) == 0.0
    q = K[0, 1]
    assert kernel_sq_dist_to_center(0, [0, 1], K) == pytest.approx((1 - q) / 2, abs=1e-15)
    K2 = gram(np.zeros((2, 2)), np.zeros((2, 2)), KernelSpec("gaussian", 1.0))
    assert kernel_sq_dist_to_center(0, [0, 1], K2) == 0.0
    with pytest.raises(ValueError):
        kernel_sq_dist_to_center(0, [], K)


def test_kernel_sq_dist_matches_explicit_feature_map():
    # degree-2 polynomial kernel (x.y)^2 has the explicit map (x1^2, sqrt2 x1 x2, x2^2)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 2))
    K = (X @ X.T) ** 2
    phi = np.column_stack([X[:, 0] ** 2, np.sqrt(2) * X[:, 0] * X[:, 1], X[:, 1] ** 2])
    rows = [1, 3, 4]
    c = phi[rows].mean(axis=0)
    for i in range(6):
        expect = float(np.sum((phi[i] - c) ** 2))
        assert kernel_sq_dist_to_center(i, rows, K) == pytest.approx(expect, rel=1e-10)
    np.testing.assert_allclose(kernel_sq_dists(K, rows),
                               [kernel_sq_dist_to_center(i, rows, K) for i in range(6)],
                               rtol=1e-12)


def test_kernel_membership_single_instance_class():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    mv = membership_kernel(Dataset(X, [1, 1, 1, -1]), KernelSpec("gaussian", 1.0))
    assert mv.s_minus[0] == pytest.approx(0.9)


def test_kernel_membership_wide_kernel_matches_linear_ranking():
    X = np.array([[0, 0], [1, 0.2], [0.3, 1.1], [3, 3], [4, 2.5], [3.6, 4.2]], dtype=float)
    d = Dataset(X, [1, 1, 1, -1, -1, -1])
    lin = membership_linear(d)
    ker = membership_kernel(d, KernelSpec("gaussian", 1e3))
    for a, b in ((lin.s_plus, ker.s_plus), (lin.s_minus, ker.s_minus)):
        assert np.argsort(a).tolist() == np.argsort(b).tolist()


def test_kernel_membership_bounds_and_precomputed_gram():
    tr, _ = gen_ripley_mixture(120, 2, 3)
    k = KernelSpec("gaussian", 0.5)
    a = membership_kernel(tr, k)
    b = membership_kernel(tr, k, K=gram(tr.features, tr.features, k))
    np.testing.assert_array_equal(a.s_plus, b.s_plus)
    s = np.concatenate([a.s_plus, a.s_minus])
    assert np.all(s > 0) and np.all(s <= 0.9 + 1e-15)


def test_for_labels_scatter():
    d = hand_set()
    mv = membership_linear(d)
    s = mv.for_labels(d.labels)
    np.testing.assert_array_equal(s[:3], mv.s_plus)
    assert s[3] == mv.s_minus[0]


def test_params_validation():
    with pytest.raises(ValueError):
        MembershipParams(mu=1.5)
    with pytest.raises(ValueError):
        MembershipParams(delta=0.0)
