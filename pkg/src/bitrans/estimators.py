"""Estimator API for transductive and baseline predictors.

All estimators follow the sklearn fit/predict contract (get_params/set_params
come from BaseEstimator) so they compose with the wider ecosystem. Training
is deterministic given (data, params, seed).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .anchors import DeltaBank, RhoPolicy, select_anchors
from .bilinear import BilinearPairModel, WeightingFunction
from .nets import AdamState, adam_step, make_net, mse_loss, net_backward, net_forward


def _validated(X, y=None):
    if y is None:
        return check_array(X, dtype=np.float64, ensure_2d=True)
    X, y = check_X_y(X, y, dtype=np.float64, multi_output=True)
    if y.ndim == 1:
        y = y[:, None]
    return X, y


def _all_pairs(n: int):
    """Index arrays (ii, jj) over all ordered pairs with j != i."""
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = ii != jj
    return ii[mask], jj[mask]


def _resolve_policy(rho_policy: str, rho: float, percentile: float) -> RhoPolicy:
    if rho_policy == "fixed":
        return RhoPolicy.fixed(rho)
    if rho_policy == "nearest":
        return RhoPolicy.nearest()
    if rho_policy == "percentile":
        return RhoPolicy.percentile(percentile)
    raise ValueError(f"unknown rho_policy {rho_policy!r}")


class BilinearTransduction(BaseEstimator, RegressorMixin):
    """Bilinear transductive regressor.

    Trains h(x_i - x_j, x_j) -> y_i over uniformly sampled training pairs;
    predicts an out-of-sample point by picking an anchor whose difference to
    the query is close to a seen training difference.
    """

    def __init__(self, n_layers=2, n_units=128, segment_size=32, fourier=True,
                 learning_rate=1e-4, lr_end=None, batch_size=32, n_steps=2000,
                 rho_policy="nearest", rho=0.0, percentile=10.0,
                 delta_cap=20000, predict_mode="sample", seed=0):
        self.lr_end = lr_end
        self.n_layers = n_layers
        self.n_units = n_units
        self.segment_size = segment_size
        self.fourier = fourier
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.rho_policy = rho_policy
        self.rho = rho
        self.percentile = percentile
        self.delta_cap = delta_cap
        self.predict_mode = predict_mode
        self.seed = seed

    def _make_model(self, d_in, d_out, rng):
        return BilinearPairModel.create(d_in, d_out, self.segment_size,
                                        self.n_layers, self.n_units,
                                        self.fourier, rng)

    def _pair_weights(self, dx, anchor):
        return None

    def fit(self, X, y):
        X, y = _validated(X, y)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 training samples")
        rng = np.random.default_rng(self.seed)
        self.model_ = self._make_model(X.shape[1], y.shape[1], rng)
        ii, jj = _all_pairs(X.shape[0])
        dx = X[ii] - X[jj]
        anchor = X[jj]
        targets = y[ii]
        weights = self._pair_weights(dx, anchor)
        self.train_log_ = self.model_.fit_pairs(
            dx, anchor, targets, weights=weights, lr=self.learning_rate,
            lr_end=self.lr_end, batch_size=self.batch_size,
            n_steps=self.n_steps, seed=self.seed,
            log_every=max(1, self.n_steps // 50))
        self.X_train_ = X
        self.y_train_ = y
        self.bank_ = DeltaBank.build(X, cap=self.delta_cap, seed=self.seed)
        return self

    def _policy(self) -> RhoPolicy:
        return _resolve_policy(self.rho_policy, self.rho, self.percentile)

    def _choose_anchor(self, x, rng) -> int:
        idx, _ = select_anchors(x, self.X_train_, self.bank_, self._policy())
        return int(rng.choice(idx))

    def predict(self, X, rng=None):
        check_is_fitted(self, "model_")
        X = _validated(X)
        if rng is None:
            rng = np.random.default_rng(self.seed + 1)
        out = np.empty((X.shape[0], self.y_train_.shape[1]))
        policy = self._policy()
        for i, x in enumerate(X):
            idx, _ = select_anchors(x, self.X_train_, self.bank_, policy)
            if self.predict_mode == "mean":
                anchors = self.X_train_[idx]
                preds = self.model_.forward(x[None, :] - anchors, anchors)
                out[i] = preds.mean(axis=0)
            else:
                j = int(rng.choice(idx))
                out[i] = self.model_.forward(x - self.X_train_[j], self.X_train_[j])
        return out

    def train_mse(self) -> float:
        check_is_fitted(self, "model_")
        return self.train_log_.final_loss


class WeightedTransduction(BilinearTransduction):
    """Bilinear transduction with a pretrained scalar weighting function
    gating the training pairs and the test-time anchor choice.

    anchor_mode "argmax" picks the highest-weight anchor (ties to the lowest
    index); "sample" draws proportionally to the weights.

    mask_threshold, when set, hard-gates the training pairs: pairs with
    weight below the threshold get zero loss instead of a down-scaled one.
    Anchor selection at predict time always uses the raw weights, so a
    borderline classifier can still rank anchors even when its positives
    are sparse.
    """

    def __init__(self, omega: WeightingFunction = None, n_layers=2, n_units=128,
                 segment_size=32, fourier=True, learning_rate=1e-4,
                 lr_end=None, batch_size=32, n_steps=2000,
                 rho_policy="nearest", rho=0.0,
                 percentile=10.0, delta_cap=20000, predict_mode="sample",
                 anchor_mode="argmax", mask_threshold=None, seed=0):
        super().__init__(n_layers=n_layers, n_units=n_units,
                         segment_size=segment_size, fourier=fourier,
                         learning_rate=learning_rate, lr_end=lr_end,
                         batch_size=batch_size,
                         n_steps=n_steps, rho_policy=rho_policy, rho=rho,
                         percentile=percentile, delta_cap=delta_cap,
                         predict_mode=predict_mode, seed=seed)
        self.omega = omega
        self.anchor_mode = anchor_mode
        self.mask_threshold = mask_threshold

    def _pair_weights(self, dx, anchor):
        if self.omega is None:
            return None
        w = self.omega(dx, anchor)
        if self.mask_threshold is not None:
            w = (w >= self.mask_threshold).astype(float)
        return w

    def predict(self, X, rng=None):
        check_is_fitted(self, "model_")
        if self.omega is None:
            return super().predict(X, rng=rng)
        X = _validated(X)
        if rng is None:
            rng = np.random.default_rng(self.seed + 1)
        out = np.empty((X.shape[0], self.y_train_.shape[1]))
        policy = self._policy()
        for i, x in enumerate(X):
            # the weighting function is only trained on differences that
            # occur between training points, so restrict the candidates to
            # anchors whose difference stays near the training delta bank
            # before ranking them by weight
            idx, _ = select_anchors(x, self.X_train_, self.bank_, policy)
            cand = self.X_train_[idx]
            w = self.omega(x[None, :] - cand, cand)
            if self.anchor_mode == "mean":
                preds = self.model_.forward(x[None, :] - cand, cand)
                if w.sum() <= 0:
                    out[i] = preds.mean(axis=0)
                else:
                    out[i] = (w[:, None] * preds).sum(axis=0) / w.sum()
                continue
            if self.anchor_mode == "sample" and w.sum() > 0:
                probs = w / w.sum()
                k = int(rng.choice(len(w), p=probs))
            else:
                k = int(np.argmax(w))
            j = int(idx[k])
            out[i] = self.model_.forward(x - self.X_train_[j], self.X_train_[j])
        return out


class LinearBaseline(BaseEstimator, RegressorMixin):
    """Single affine map x -> y, fit by least squares."""

    def __init__(self):
        pass

    def fit(self, X, y):
        X, y = _validated(X, y)
        A = np.hstack([X, np.ones((X.shape[0], 1))])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        self.coef_ = coef[:-1]
        self.intercept_ = coef[-1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = _validated(X)
        return X @ self.coef_ + self.intercept_


def _fit_mlp(net, X, y, lr, batch_size, n_steps, seed, lr_end=None):
    rng = np.random.default_rng(seed)
    state = AdamState(lr=lr).init(net.params())
    n = X.shape[0]
    loss = float("nan")
    decay = (lr_end / lr) ** (1.0 / max(n_steps - 1, 1)) if lr_end else 1.0
    for step in range(n_steps):
        if decay != 1.0:
            state.lr = lr * decay ** step
        idx = rng.integers(0, n, size=batch_size) if batch_size < n else np.arange(n)
        pred, cache = net_forward(net, X[idx])
        loss, grad = mse_loss(pred, y[idx])
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss while training mlp")
        grads, _ = net_backward(net, cache, grad)
        adam_step(state, net.params(), grads)
    return loss


class MLPBaseline(BaseEstimator, RegressorMixin):
    """Plain feedforward network x -> y trained with Adam on minibatches."""

    def __init__(self, n_layers=2, n_units=128, fourier=True,
                 learning_rate=1e-4, lr_end=None, batch_size=32,
                 n_steps=2000, seed=0):
        self.n_layers = n_layers
        self.n_units = n_units
        self.fourier = fourier
        self.learning_rate = learning_rate
        self.lr_end = lr_end
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.seed = seed

    def fit(self, X, y):
        X, y = _validated(X, y)
        rng = np.random.default_rng(self.seed)
        self.net_ = make_net(X.shape[1], y.shape[1], self.n_layers,
                             self.n_units, self.fourier, rng)
        self.final_loss_ = _fit_mlp(self.net_, X, y, self.learning_rate,
                                    self.batch_size, self.n_steps, self.seed,
                                    lr_end=self.lr_end)
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = _validated(X)
        return net_forward(self.net_, X)[0]


class ConcatTransduction(BaseEstimator, RegressorMixin):
    """Transduction without bilinear structure: an MLP over the concatenated
    (difference, anchor) pair, with the same anchor machinery at test time."""

    def __init__(self, n_layers=2, n_units=128, fourier=True,
                 learning_rate=1e-4, lr_end=None, batch_size=32, n_steps=2000,
                 rho_policy="nearest", rho=0.0, percentile=10.0,
                 delta_cap=20000, seed=0):
        self.lr_end = lr_end
        self.n_layers = n_layers
        self.n_units = n_units
        self.fourier = fourier
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.rho_policy = rho_policy
        self.rho = rho
        self.percentile = percentile
        self.delta_cap = delta_cap
        self.seed = seed

    def fit(self, X, y):
        X, y = _validated(X, y)
        rng = np.random.default_rng(self.seed)
        self.net_ = make_net(2 * X.shape[1], y.shape[1], self.n_layers,
                             self.n_units, self.fourier, rng)
        ii, jj = _all_pairs(X.shape[0])
        feats = np.hstack([X[ii] - X[jj], X[jj]])
        self.final_loss_ = _fit_mlp(self.net_, feats, y[ii], self.learning_rate,
                                    self.batch_size, self.n_steps, self.seed,
                                    lr_end=self.lr_end)
        self.X_train_ = X
        self.y_train_ = y
        self.bank_ = DeltaBank.build(X, cap=self.delta_cap, seed=self.seed)
        return self

    def predict(self, X, rng=None):
        check_is_fitted(self, "net_")
        X = _validated(X)
        if rng is None:
            rng = np.random.default_rng(self.seed + 1)
        policy = _resolve_policy(self.rho_policy, self.rho, self.percentile)
        out = np.empty((X.shape[0], self.y_train_.shape[1]))
        for i, x in enumerate(X):
            idx, _ = select_anchors(x, self.X_train_, self.bank_, policy)
            j = int(rng.choice(idx))
            feat = np.concatenate([x - self.X_train_[j], self.X_train_[j]])
            out[i] = net_forward(self.net_, feat)[0]
        return out


class DeepSetsBaseline(BaseEstimator, RegressorMixin):
    """Two branch networks (observation part, goal part) whose embeddings are
    summed and passed through a one-hidden-layer head.

    goal_slice declares which state dims are the goal/context; it is required.
    """

    def __init__(self, goal_slice=None, n_layers=2, n_units=128, fourier=False,
                 embed_dim=64, learning_rate=1e-4, lr_end=None, batch_size=32,
                 n_steps=2000, seed=0):
        self.goal_slice = goal_slice
        self.lr_end = lr_end
        self.n_layers = n_layers
        self.n_units = n_units
        self.fourier = fourier
        self.embed_dim = embed_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.seed = seed

    def _split(self, X):
        goal_idx = np.asarray(self.goal_slice, dtype=int)
        obs_idx = np.setdiff1d(np.arange(X.shape[1]), goal_idx)
        return X[:, obs_idx], X[:, goal_idx]

    def fit(self, X, y):
        if self.goal_slice is None:
            raise ValueError("DeepSetsBaseline requires goal_slice")
        X, y = _validated(X, y)
        rng = np.random.default_rng(self.seed)
        obs, goal = self._split(X)
        self.obs_net_ = make_net(obs.shape[1], self.embed_dim, self.n_layers,
                                 self.n_units, self.fourier, rng)
        self.goal_net_ = make_net(goal.shape[1], self.embed_dim, self.n_layers,
                                  self.n_units, self.fourier, rng)
        self.head_ = make_net(self.embed_dim, y.shape[1], 1, self.n_units,
                              False, rng)
        params = (self.obs_net_.params() + self.goal_net_.params()
                  + self.head_.params())
        state = AdamState(lr=self.learning_rate).init(params)
        gen = np.random.default_rng(self.seed)
        n = X.shape[0]
        lr0 = self.learning_rate
        decay = ((self.lr_end / lr0) ** (1.0 / max(self.n_steps - 1, 1))
                 if self.lr_end else 1.0)
        for step in range(self.n_steps):
            if decay != 1.0:
                state.lr = lr0 * decay ** step
            idx = gen.integers(0, n, size=self.batch_size)
            eo, co = net_forward(self.obs_net_, obs[idx])
            eg, cg = net_forward(self.goal_net_, goal[idx])
            pred, ch = net_forward(self.head_, eo + eg)
            loss, grad = mse_loss(pred, y[idx])
            if not np.isfinite(loss):
                raise FloatingPointError("non-finite loss while training deepsets")
            hgrads, gsum = net_backward(self.head_, ch, grad)
            ograds, _ = net_backward(self.obs_net_, co, gsum)
            ggrads, _ = net_backward(self.goal_net_, cg, gsum)
            adam_step(state, params, ograds + ggrads + hgrads)
            self.final_loss_ = loss
        return self

    def predict(self, X):
        check_is_fitted(self, "head_")
        X = _validated(X)
        obs, goal = self._split(X)
        eo = net_forward(self.obs_net_, obs)[0]
        eg = net_forward(self.goal_net_, goal)[0]
        return net_forward(self.head_, eo + eg)[0]
