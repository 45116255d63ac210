"""Minimal dense network stack: MLP forward/backward, trainable Fourier
feature layer, Adam, and the squared-error loss.

All arithmetic is float64. Inputs may be single vectors (d,) or batches
(n, d); parameter gradients are summed over the batch, matching a loss that
is already averaged upstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FOURIER_EXPANSION = 40


class ContractViolation(ValueError):
    pass


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str  # "relu" | "identity"


@dataclass
class FourierLayer:
    """First-layer feature map: features = sin(pi * W x), output 40x input dim.

    W is trainable like any other weight matrix.
    """

    w: np.ndarray  # (40 * d_in, d_in)

    @property
    def d_in(self) -> int:
        return self.w.shape[1]


@dataclass
class DenseNet:
    layers: list[Layer]
    fourier: FourierLayer | None = None

    @property
    def d_in(self) -> int:
        if self.fourier is not None:
            return self.fourier.d_in
        return self.layers[0].w.shape[1]

    @property
    def d_out(self) -> int:
        return self.layers[-1].w.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        if self.fourier is not None:
            out.append(self.fourier.w)
        for layer in self.layers:
            out.append(layer.w)
            out.append(layer.b)
        return out


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def make_net(d_in: int, d_out: int, n_layers: int, n_units: int,
             fourier: bool, rng: np.random.Generator) -> DenseNet:
    """Standard MLP: n_layers hidden relu layers of n_units, identity output,
    optionally preceded by a trainable Fourier feature layer."""
    flayer = None
    cur = d_in
    if fourier:
        flayer = FourierLayer(_uniform_init(rng, (FOURIER_EXPANSION * d_in, d_in), d_in))
        cur = FOURIER_EXPANSION * d_in
    layers = []
    for _ in range(n_layers):
        layers.append(Layer(_uniform_init(rng, (n_units, cur), cur),
                            _uniform_init(rng, (n_units,), cur), "relu"))
        cur = n_units
    layers.append(Layer(_uniform_init(rng, (d_out, cur), cur),
                        _uniform_init(rng, (d_out,), cur), "identity"))
    return DenseNet(layers, flayer)


def fourier_forward(layer: FourierLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.d_in:
        raise ContractViolation(
            f"fourier input dim {x.shape[-1]} != layer dim {layer.d_in}")
    return np.sin(np.pi * (x @ layer.w.T))


def net_forward(net: DenseNet, x: np.ndarray):
    """Forward pass. Returns (y, cache); cache feeds net_backward."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.d_in:
        raise ContractViolation(f"input dim {x.shape[-1]} != net dim {net.d_in}")
    cache = {"x": x}
    h = x
    if net.fourier is not None:
        z = h @ net.fourier.w.T
        cache["fourier_z"] = z
        h = np.sin(np.pi * z)
    inputs = []
    preacts = []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.w.T + layer.b
        preacts.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
    cache["inputs"] = inputs
    cache["preacts"] = preacts
    return h, cache


def net_backward(net: DenseNet, cache, grad_y: np.ndarray):
    """Backward pass; returns (param_grads, grad_x).

    param_grads parallels net.params(). grad_y may be (d_out,) or (n, d_out)
    and must match the forward that produced cache.
    """
    grad_y = np.asarray(grad_y, dtype=float)
    inputs = cache["inputs"]
    preacts = cache["preacts"]
    if len(inputs) != len(net.layers):
        raise ContractViolation("cache does not match network")
    if grad_y.shape != preacts[-1].shape:
        raise ContractViolation("grad_y shape does not match forward output")
    batched = grad_y.ndim == 2

    g = grad_y
    layer_grads = []
    for layer, h_in, z in zip(reversed(net.layers), reversed(inputs), reversed(preacts)):
        if layer.activation == "relu":
            g = g * (z > 0.0)
        if batched:
            dw = g.T @ h_in
            db = g.sum(axis=0)
        else:
            dw = np.outer(g, h_in)
            db = g.copy()
        layer_grads.append((dw, db))
        g = g @ layer.w
    layer_grads.reverse()

    grads = []
    if net.fourier is not None:
        z = cache["fourier_z"]
        gz = g * np.pi * np.cos(np.pi * z)
        x = cache["x"]
        if batched:
            dwf = gz.T @ x
        else:
            dwf = np.outer(gz, x)
        grads.append(dwf)
        g = gz @ net.fourier.w
    for dw, db in layer_grads:
        grads.append(dw)
        grads.append(db)
    return grads, g


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all components; returns (loss, grad wrt pred)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ContractViolation("mse_loss shape mismatch")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def init(self, params: list[np.ndarray]) -> "AdamState":
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step = 0
        return self


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One Adam update, in place on params.

    Raises before touching anything if any gradient is non-finite.
    """
    if len(params) != len(grads):
        raise ContractViolation("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ContractViolation("params/grads shape mismatch")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient in adam_step")
    if not state.m:
        state.init(params)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def numeric_gradients(net: DenseNet, x: np.ndarray, target: np.ndarray,
                      h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients of mse_loss(net(x), target) wrt every
    parameter. Independent of net_backward; used as an oracle."""
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp, _ = mse_loss(net_forward(net, x)[0], target)
            p[idx] = orig - h
            lm, _ = mse_loss(net_forward(net, x)[0], target)
            p[idx] = orig
            g[idx] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


# -- checkpoint serialization -------------------------------------------------

def net_to_dict(net: DenseNet) -> dict:
    arch = {
        "layers": [{"in": int(l.w.shape[1]), "out": int(l.w.shape[0]),
                    "activation": l.activation} for l in net.layers],
        "fourier": net.fourier is not None,
    }
    params = {
        "layers": [{"w": [float(v) for v in l.w.ravel()],
                    "b": [float(v) for v in l.b]} for l in net.layers],
    }
    if net.fourier is not None:
        params["fourier_w"] = [float(v) for v in net.fourier.w.ravel()]
    return {"version": 1, "arch": arch, "params": params}


def net_from_dict(doc: dict) -> DenseNet:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    arch = doc["arch"]
    layers = []
    for spec, pl in zip(arch["layers"], doc["params"]["layers"]):
        w = np.array(pl["w"], dtype=float).reshape(spec["out"], spec["in"])
        b = np.array(pl["b"], dtype=float)
        layers.append(Layer(w, b, spec["activation"]))
    flayer = None
    if arch["fourier"]:
        d_in = arch["layers"][0]["in"] // FOURIER_EXPANSION
        w = np.array(doc["params"]["fourier_w"], dtype=float).reshape(
            FOURIER_EXPANSION * d_in, d_in)
        flayer = FourierLayer(w)
    return DenseNet(layers, flayer)


def save_net(net: DenseNet, path, extra: dict | None = None) -> None:
    doc = net_to_dict(net)
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f)


def load_net(path) -> DenseNet:
    with open(path) as f:
        return net_from_dict(json.load(f))
