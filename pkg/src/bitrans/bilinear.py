"""Two-tower bilinear predictor over (difference, anchor) pairs.

Each output component k is the dot product of the k-th m-sized segments of
the difference embedding and the anchor embedding, so the prediction matrix
over any grid of differences x anchors has rank at most m per component.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import nets
from .nets import AdamState, DenseNet, adam_step, make_net, net_backward, net_forward


@dataclass
class TrainLog:
    losses: list

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


class BilinearPairModel:
    """K output components, each an inner product of m-dim embedding segments."""

    def __init__(self, f_net: DenseNet, g_net: DenseNet, n_outputs: int, segment_size: int):
        if f_net.d_out != n_outputs * segment_size or g_net.d_out != n_outputs * segment_size:
            raise ValueError("embedding nets must output n_outputs * segment_size values")
        self.f_net = f_net
        self.g_net = g_net
        self.n_outputs = n_outputs
        self.segment_size = segment_size

    @classmethod
    def create(cls, d_in: int, n_outputs: int, segment_size: int, n_layers: int,
               n_units: int, fourier: bool, rng: np.random.Generator) -> "BilinearPairModel":
        d_emb = n_outputs * segment_size
        f_net = make_net(d_in, d_emb, n_layers, n_units, fourier, rng)
        g_net = make_net(d_in, d_emb, n_layers, n_units, fourier, rng)
        return cls(f_net, g_net, n_outputs, segment_size)

    def params(self):
        return self.f_net.params() + self.g_net.params()

    def forward(self, dx, anchor):
        """Prediction for a single (difference, anchor) pair or a batch."""
        dx = np.asarray(dx, dtype=float)
        single = dx.ndim == 1
        y, _, _, _ = self._forward_cached(np.atleast_2d(dx),
                                          np.atleast_2d(np.asarray(anchor, dtype=float)))
        return y[0] if single else y

    def _forward_cached(self, dx, anchor):
        femb, fcache = net_forward(self.f_net, dx)
        gemb, gcache = net_forward(self.g_net, anchor)
        n = dx.shape[0]
        k, m = self.n_outputs, self.segment_size
        y = (femb.reshape(n, k, m) * gemb.reshape(n, k, m)).sum(axis=2)
        return y, femb, (fcache, gcache), gemb

    def _backward(self, grad_y, femb, gemb, caches):
        n = grad_y.shape[0]
        k, m = self.n_outputs, self.segment_size
        gy = grad_y[:, :, None]  # (n, k, 1)
        dfemb = (gy * gemb.reshape(n, k, m)).reshape(n, k * m)
        dgemb = (gy * femb.reshape(n, k, m)).reshape(n, k * m)
        fcache, gcache = caches
        fgrads, _ = net_backward(self.f_net, fcache, dfemb)
        ggrads, _ = net_backward(self.g_net, gcache, dgemb)
        return fgrads + ggrads

    def fit_pairs(self, dx, anchor, y, weights=None, lr: float = 1e-4,
                  batch_size: int = 32, n_steps: int = 2000,
                  seed: int = 0, log_every: int = 0,
                  lr_end: float | None = None) -> TrainLog:
        """Minibatch Adam on the (weighted) squared error over explicit
        (difference, anchor, target) triples.

        weights, when given, multiply the per-sample squared errors; with all
        weights equal to 1 the optimizer trajectory is identical to the
        unweighted case under the same seed.
        """
        dx = np.atleast_2d(np.asarray(dx, dtype=float))
        anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        n = dx.shape[0]
        if weights is None:
            weights = np.ones(n)
        else:
            weights = np.asarray(weights, dtype=float)
            if np.max(weights) <= 1e-12:
                raise RuntimeError("degenerate weighting: all pair weights ~ 0")
        rng = np.random.default_rng(seed)
        state = AdamState(lr=lr).init(self.params())
        losses = []
        decay = (lr_end / lr) ** (1.0 / max(n_steps - 1, 1)) if lr_end else 1.0
        for step in range(n_steps):
            if decay != 1.0:
                state.lr = lr * decay ** step
            idx = rng.integers(0, n, size=batch_size)
            pred, femb, caches, gemb = self._forward_cached(dx[idx], anchor[idx])
            diff = pred - y[idx]
            w = weights[idx][:, None]
            loss = float(np.mean(w * diff * diff))
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at step {step}")
            grad = 2.0 * w * diff / diff.size
            grads = self._backward(grad, femb, gemb, caches)
            adam_step(state, self.params(), grads)
            if log_every and (step % log_every == 0 or step == n_steps - 1):
                losses.append(loss)
        return TrainLog(losses)

    def mse_on(self, dx, anchor, y) -> float:
        pred = self.forward(np.atleast_2d(dx), np.atleast_2d(anchor))
        diff = pred - np.atleast_2d(y)
        return float(np.mean(diff * diff))

    # -- checkpointing --------------------------------------------------------

    def save(self, path_prefix) -> None:
        meta = {"K": self.n_outputs, "m": self.segment_size}
        nets.save_net(self.f_net, f"{path_prefix}.f.json", {"role": "f", **meta})
        nets.save_net(self.g_net, f"{path_prefix}.g.json", {"role": "g", **meta})

    @classmethod
    def load(cls, path_prefix) -> "BilinearPairModel":
        with open(f"{path_prefix}.f.json") as fh:
            fdoc = json.load(fh)
        with open(f"{path_prefix}.g.json") as fh:
            gdoc = json.load(fh)
        return cls(nets.net_from_dict(fdoc), nets.net_from_dict(gdoc),
                   fdoc["K"], fdoc["m"])


def bilinear_forward(model: BilinearPairModel, dx, anchor):
    return model.forward(dx, anchor)


class WeightingFunction:
    """Scalar bilinear score squashed through a logistic to (0, 1); gates
    which (difference, anchor) pairs are worth transducing."""

    def __init__(self, model: BilinearPairModel):
        if model.n_outputs != 1:
            raise ValueError("weighting function needs a scalar bilinear model")
        self.model = model

    def __call__(self, dx, anchor):
        dx = np.atleast_2d(np.asarray(dx, dtype=float))
        anchor = np.atleast_2d(np.asarray(anchor, dtype=float))
        # chunked so that scoring every pair of a large dataset does not
        # materialize a huge feature matrix at once
        chunk = 20000
        out = np.empty(dx.shape[0])
        for lo in range(0, dx.shape[0], chunk):
            hi = min(lo + chunk, dx.shape[0])
            raw = np.asarray(self.model.forward(dx[lo:hi], anchor[lo:hi]),
                             dtype=float)
            raw = np.clip(raw[..., 0], -500.0, 500.0)
            out[lo:hi] = 1.0 / (1.0 + np.exp(-raw))
        return out

    def save(self, path_prefix) -> None:
        meta = {"K": 1, "m": self.model.segment_size}
        nets.save_net(self.model.f_net, f"{path_prefix}.f.json", {"role": "omega", **meta})
        nets.save_net(self.model.g_net, f"{path_prefix}.g.json", {"role": "omega", **meta})


def train_weighting(pair_dx, pair_anchor, labels, d_in: int | None = None,
                    segment_size: int = 16, n_layers: int = 2, n_units: int = 64,
                    fourier: bool = False, lr: float = 1e-3, batch_size: int = 32,
                    n_steps: int = 4000, seed: int = 0,
                    lr_end: float | None = None) -> WeightingFunction:
    """Train a scalar weighting function on binary pair labels (MSE on the
    squashed output)."""
    import warnings

    pair_dx = np.atleast_2d(np.asarray(pair_dx, dtype=float))
    pair_anchor = np.atleast_2d(np.asarray(pair_anchor, dtype=float))
    labels = np.asarray(labels, dtype=float).reshape(-1)
    uniq = np.unique(labels)
    if uniq.size < 2:
        warnings.warn("weighting labels are single-class; training anyway")
    rng = np.random.default_rng(seed)
    model = BilinearPairModel.create(pair_dx.shape[1] if d_in is None else d_in,
                                     1, segment_size, n_layers, n_units, fourier, rng)
    omega = WeightingFunction(model)
    state = AdamState(lr=lr).init(model.params())
    n = pair_dx.shape[0]
    decay = (lr_end / lr) ** (1.0 / max(n_steps - 1, 1)) if lr_end else 1.0
    for step in range(n_steps):
        if decay != 1.0:
            state.lr = lr * decay ** step
        idx = rng.integers(0, n, size=batch_size)
        raw, femb, caches, gemb = model._forward_cached(pair_dx[idx], pair_anchor[idx])
        sq = 1.0 / (1.0 + np.exp(-np.clip(raw[:, 0], -500.0, 500.0)))
        diff = sq - labels[idx]
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite weighting loss at step {step}")
        grad_raw = (2.0 * diff / diff.size) * sq * (1.0 - sq)
        grads = model._backward(grad_raw[:, None], femb, gemb, caches)
        adam_step(state, model.params(), grads)
    return omega


def weighting_mse(omega: WeightingFunction, pair_dx, pair_anchor, labels) -> float:
    out = omega(np.atleast_2d(pair_dx), np.atleast_2d(pair_anchor))
    labels = np.asarray(labels, dtype=float).reshape(-1)
    return float(np.mean((out - labels) ** 2))
