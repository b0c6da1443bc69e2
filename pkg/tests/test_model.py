from dataclasses import replace

import numpy as np
import pytest

from frtsvm.data import Dataset, gen_ripley_mixture, gen_sine_band, train_test_split
from frtsvm.kernels import KernelSpec
from frtsvm.model import (
    ConvergenceError,
    KernelModel,
    LinearModel,
    ModelError,
    TrainConfig,
    accuracy,
    load_model,
    model_from_dict,
    model_to_dict,
    plane_predict,
    predict_linear,
    save_model,
    train,
    train_kernel,
    train_linear,
    train_tsvm_baseline,
)
from frtsvm.solver import SolverConfig

TIGHT = SolverConfig(epsilon=1e-10, max_epochs=100_000)
LIN = TrainConfig(kernel=KernelSpec("linear"))


def blobs(seed=0, n=40, gap=3.0):
    rng = np.random.default_rng(seed)
    Xp = rng.normal(size=(n, 2)) * 0.5 + [gap, 0]
    Xm = rng.normal(size=(n, 2)) * 0.5 - [gap, 0]
    return Dataset(np.vstack([Xp, Xm]), np.r_[np.ones(n), -np.ones(n)])


def mirrored(seed=1, n=15):
    rng = np.random.default_rng(seed)
    Xp = rng.normal(size=(n, 2)) * [1.0, 0.4] + [0, 1.0]
    Xm = Xp * [1, -1]
    return Dataset(np.vstack([Xp, Xm]), np.r_[np.ones(n), -np.ones(n)])


def identity_linear(w_plus, b_plus, w_minus, b_minus):
    from frtsvm.model import _identity_scaler
    return LinearModel(np.asarray(w_plus, float), np.asarray(w_minus, float), b_plus, b_minus,
                       _identity_scaler(len(w_plus)), LIN)


def test_separable_blobs_linear():
    d = blobs()
    model, diag = train_linear(d, LIN)
    assert accuracy(model, d) == 1.0
    assert diag.converged
    model, _ = train_tsvm_baseline(d, LIN)
    assert accuracy(model, d) == 1.0


def test_mirror_symmetry():
    d = mirrored()
    cfg = replace(LIN, scale=False, solver=TIGHT, c1=0.5, c2=0.5, c3=2.0, c4=2.0)
    m, _ = train_linear(d, cfg)
    R = np.array([1.0, -1.0])
    # reflecting across the x-axis swaps the classes and flips the constraint sign
    np.testing.assert_allclose(m.w_plus, -R * m.w_minus, atol=1e-6)
    assert abs(m.b_plus) == pytest.approx(abs(m.b_minus), abs=1e-6)


def test_unit_memberships_reduce_to_baseline():
    d = blobs(3, gap=1.0)
    c = 2.0
    lam = 0.01
    ones = np.ones(d.n_samples)
    fr, _ = train_linear(d, replace(LIN, c1=lam, c2=lam, c3=c, c4=c, solver=TIGHT),
                         memberships=ones)
    ts, _ = train_tsvm_baseline(d, replace(LIN, c1=c, c2=c, solver=TIGHT))
    # the two differ only in whether the bias coordinate is ridge-penalized
    for a, b in ((fr.w_plus, ts.w_plus), (fr.w_minus, ts.w_minus)):
        np.testing.assert_allclose(a, b, rtol=0.05, atol=0.05)
    assert np.mean(fr.predict(d.features) == ts.predict(d.features)) >= 0.95


def test_xor_kernel():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    d = Dataset(X, [1, 1, -1, -1])
    m, _ = train_kernel(d, TrainConfig(kernel=KernelSpec("gaussian", 1.0), c3=8, c4=8))
    assert accuracy(m, d) == 1.0


def test_sine_band_clean():
    tr, te = train_test_split(gen_sine_band(3000, 0), 600, 1)
    cfg = TrainConfig(c1=2**-4, c2=2**-4, c3=8, c4=8, kernel=KernelSpec("gaussian", 0.0625))
    m, diag = train(tr, cfg)
    assert accuracy(m, te) >= 0.99
    assert diag.converged


def test_collapsed_memberships_rejected():
    d = blobs()
    with pytest.raises(ModelError):
        train_linear(d, LIN, memberships=np.zeros(d.n_samples))


def test_strict_raises_on_epoch_cap():
    tr, _ = gen_ripley_mixture(100, 2, 0)
    cfg = TrainConfig(c3=256, c4=256, solver=SolverConfig(epsilon=1e-12, max_epochs=1))
    with pytest.raises(ConvergenceError):
        train(tr, cfg)
    _, diag = train(tr, cfg, strict=False)
    assert not diag.converged


def test_predict_on_plane_and_hand_planes():
    m = identity_linear([0.0, 1.0], -1.0, [0.0, 1.0], 1.0)
    assert m.predict([[3.0, 1.0]])[0] == 1
    assert m.predict([[0.0, 0.2]])[0] == 1
    assert m.predict([[0.0, -0.2]])[0] == -1
    assert m.predict([[0.0, 0.0]])[0] == 1  # equidistant ties go to +1
    assert predict_linear(m, [0.0, -0.7])[0] == -1


def test_prediction_homogeneous_in_plane_scale():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    a = identity_linear([0.3, 1.0], -0.2, [1.0, -0.4], 0.5)
    b = identity_linear([0.9, 3.0], -0.6, [1.0, -0.4], 0.5)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


def test_degenerate_plane_rejected():
    with pytest.raises(ModelError):
        identity_linear([0.0, 0.0], 1.0, [1.0, 0.0], 0.0)


def test_kernel_predict_equals_plane_predict_for_linear_kernel():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 2))
    v_p, v_m = rng.normal(size=3), rng.normal(size=3)
    B = np.hstack([X, np.ones((10, 1))])[:, :2]
    lin = identity_linear(v_p[:2], v_p[2], v_m[:2], v_m[2])
    np.testing.assert_array_equal(plane_predict(B, v_p, v_m), lin.predict(X))
    # same planes expressed through a linear Gram: w = X' c
    c_p = np.linalg.lstsq(X.T, v_p[:2], rcond=None)[0]
    c_m = np.linalg.lstsq(X.T, v_m[:2], rcond=None)[0]
    K = X @ X.T
    np.testing.assert_array_equal(plane_predict(K, np.r_[c_p, v_p[2]], np.r_[c_m, v_m[2]], K),
                                  lin.predict(X))


def test_training_point_on_plane_plus():
    tr, _ = gen_ripley_mixture(60, 2, 5)
    m, _ = train_kernel(tr, TrainConfig(kernel=KernelSpec("gaussian", 0.5)))
    sp, sm = m.signed_distances(tr.features)
    dp, dm = m.distances(tr.features)
    np.testing.assert_allclose(dp, np.abs(sp))
    np.testing.assert_array_equal(m.predict(tr.features), np.where(dp <= dm + 1e-12, 1, -1))


def test_dimension_mismatch():
    m, _ = train_linear(blobs(), LIN)
    with pytest.raises(ValueError, match="dimension"):
        m.predict(np.zeros((2, 3)))


@pytest.mark.parametrize("kind", ["linear", "gaussian"])
def test_model_roundtrip(tmp_path, kind):
    tr, te = gen_ripley_mixture(80, 50, 1)
    m, _ = train(tr, TrainConfig(kernel=KernelSpec(kind, 0.7)))
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert isinstance(back, LinearModel if kind == "linear" else KernelModel)
    np.testing.assert_array_equal(back.predict(te.features), m.predict(te.features))
    assert back.config == m.config
    assert path.read_text().endswith("\n")
    with pytest.raises(ModelError):
        model_from_dict({**model_to_dict(m), "version": 99})


def test_config_validation_and_fingerprint():
    with pytest.raises(ValueError):
        TrainConfig(c3=0)
    with pytest.raises(ValueError):
        TrainConfig(mode="svm")
    a = TrainConfig()
    assert a.fingerprint() == TrainConfig.from_dict(a.to_dict()).fingerprint()
    assert a.fingerprint() != replace(a, c1=2.0).fingerprint()


def test_training_is_deterministic():
    tr, te = gen_ripley_mixture(100, 100, 2)
    a, _ = train(tr, TrainConfig(kernel=KernelSpec("gaussian", 0.5)))
    b, _ = train(tr, TrainConfig(kernel=KernelSpec("gaussian", 0.5)))
    np.testing.assert_array_equal(a.coeff_plus, b.coeff_plus)
