import numpy as np
import pytest

from bitrans.estimators import (BilinearTransduction, ConcatTransduction,
                                DeepSetsBaseline, LinearBaseline, MLPBaseline,
                                WeightedTransduction)


def _linear_data(n=50, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 2))
    y = X @ np.array([[2.0], [-1.0]]) + 0.5
    X_oos = rng.uniform(1, 2, (n, 2))
    y_oos = X_oos @ np.array([[2.0], [-1.0]]) + 0.5
    return X, y, X_oos, y_oos


def test_linear_baseline_extrapolates_linear_data():
    X, y, X_oos, y_oos = _linear_data()
    est = LinearBaseline().fit(X, y)
    assert np.mean((est.predict(X) - y) ** 2) < 1e-20
    assert np.mean((est.predict(X_oos) - y_oos) ** 2) < 1e-6


def test_mlp_baseline_fits_linear_data():
    X, y, X_oos, y_oos = _linear_data()
    est = MLPBaseline(n_units=32, fourier=False, learning_rate=3e-3,
                      batch_size=64, n_steps=8000, seed=0).fit(X, y)
    assert np.mean((est.predict(X) - y) ** 2) < 1e-5


def test_mlp_deterministic_per_seed():
    X, y, _, _ = _linear_data()
    a = MLPBaseline(n_units=8, n_steps=50, seed=3).fit(X, y)
    b = MLPBaseline(n_units=8, n_steps=50, seed=3).fit(X, y)
    assert np.array_equal(a.predict(X), b.predict(X))


def test_concat_transduction_net_input_dim_doubles():
    X, y, _, _ = _linear_data(n=12)
    est = ConcatTransduction(n_units=8, n_steps=20, seed=0).fit(X, y)
    first = est.net_.fourier.w if est.net_.fourier is not None else est.net_.layers[0].w
    assert first.shape[1] == 2 * X.shape[1]
    assert est.predict(X[:3]).shape == (3, 1)


def test_deepsets_requires_goal_slice():
    X, y, _, _ = _linear_data(n=12)
    with pytest.raises(ValueError):
        DeepSetsBaseline().fit(X, y)


def test_deepsets_fit_predict_shapes():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (30, 4))
    y = X[:, :2] - X[:, 2:]
    est = DeepSetsBaseline(goal_slice=(2, 3), n_units=16, embed_dim=8,
                           n_steps=100, seed=0).fit(X, y)
    assert est.predict(X[:5]).shape == (5, 2)


def test_bilinear_transduction_deterministic_and_shapes():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (20, 1))
    y = np.sin(3 * X)
    kw = dict(n_units=16, segment_size=4, n_steps=100, seed=5)
    a = BilinearTransduction(**kw).fit(X, y)
    b = BilinearTransduction(**kw).fit(X, y)
    Xq = rng.uniform(0, 1, (7, 1))
    assert np.array_equal(a.predict(Xq), b.predict(Xq))
    assert a.predict(Xq).shape == (7, 1)
    assert np.isfinite(a.train_mse())


def test_bilinear_transduction_single_anchor_is_model_forward():
    X = np.array([[0.0], [1.0]])
    y = np.array([[0.0], [1.0]])
    est = BilinearTransduction(n_units=8, segment_size=2, n_steps=10,
                               rho_policy="fixed", rho=0.0, seed=0).fit(X, y)
    # query at a training point: delta bank admits it via delta = 0 or +-1
    pred = est.predict(np.array([[1.0]]))
    anchors = [est.model_.forward(np.array([1.0]) - X[j], X[j]) for j in (0, 1)]
    assert any(np.allclose(pred[0], a) for a in anchors)


def test_bilinear_transduction_mean_mode_averages_anchors():
    X = np.array([[0.0], [1.0], [2.0]])
    y = X.copy()
    est = BilinearTransduction(n_units=8, segment_size=2, n_steps=10,
                               predict_mode="mean", rho_policy="fixed",
                               rho=10.0, seed=0).fit(X, y)
    pred = est.predict(np.array([[1.0]]))
    manual = np.mean([est.model_.forward(np.array([1.0]) - x, x) for x in X],
                     axis=0)
    assert np.allclose(pred[0], manual)


class _PeakedOmega:
    """Callable weighting peaked at one anchor location."""

    def __init__(self, favored_anchor):
        self.favored = favored_anchor

    def __call__(self, dx, anchor):
        anchor = np.atleast_2d(anchor)
        return np.exp(-8.0 * (anchor[:, 0] - self.favored) ** 2)


def test_weighted_transduction_argmax_uses_peaked_anchor():
    X = np.array([[0.0], [1.0], [2.0]])
    y = X.copy()
    omega = _PeakedOmega(favored_anchor=1.0)  # weight peaks at anchor x=1
    est = WeightedTransduction(omega=omega, n_units=8, segment_size=2,
                               n_steps=10, seed=0).fit(X, y)
    # query inside the delta-bank reach so every anchor is eligible and the
    # weighting alone decides
    pred = est.predict(np.array([[2.0]]))
    expected = est.model_.forward(np.array([2.0]) - X[1], X[1])
    assert np.allclose(pred[0], expected)


def test_weighted_transduction_argmax_ties_lowest_index():
    X = np.array([[0.0], [1.0], [2.0]])
    y = X.copy()

    class ConstantOmega:
        def __call__(self, dx, anchor):
            return np.full(np.atleast_2d(dx).shape[0], 0.5)

    est = WeightedTransduction(omega=ConstantOmega(), n_units=8,
                               segment_size=2, n_steps=10, seed=0).fit(X, y)
    pred = est.predict(np.array([[2.0]]))
    expected = est.model_.forward(np.array([2.0]) - X[0], X[0])
    assert np.allclose(pred[0], expected)


def test_weighted_transduction_without_omega_matches_unweighted():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (10, 1))
    y = np.cos(X)
    kw = dict(n_units=8, segment_size=2, n_steps=50, seed=1)
    w = WeightedTransduction(**kw).fit(X, y)
    u = BilinearTransduction(**kw).fit(X, y)
    Xq = rng.uniform(0, 1, (4, 1))
    assert np.array_equal(w.predict(Xq), u.predict(Xq))


def test_get_params_round_trip_sklearn_style():
    est = BilinearTransduction(n_units=16, segment_size=8)
    params = est.get_params()
    assert params["n_units"] == 16
    clone = BilinearTransduction(**params)
    assert clone.get_params() == params
