"""MLP encoder + linear classifier with hand-derived backpropagation,
masked cross-entropy, and Adam.

The network is a stack of ReLU layers (the encoder) followed by one linear
classifier layer. The penultimate activation is the node embedding matrix
H; ``backward`` accepts an extra gradient to inject at H so regularizers
defined on embeddings can flow into all parameters through the same chain
rule. Dropout uses the inverted-scaling convention and is active only in
train mode, with masks drawn deterministically from an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, ShapeMismatch
from .tensor import as_matrix


@dataclass
class MlpParams:
    """Layer weights/biases; all layers but the last form the encoder."""

    layer_weights: list
    layer_biases: list
    dims: list
    activation: str = "relu"

    @property
    def n_layers(self) -> int:
        return len(self.layer_weights)

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_weights=[w.copy() for w in self.layer_weights],
            layer_biases=[b.copy() for b in self.layer_biases],
            dims=list(self.dims),
            activation=self.activation,
        )

    def flat_arrays(self):
        """(name, array) pairs in a stable order."""
        out = []
        for i, (w, b) in enumerate(zip(self.layer_weights, self.layer_biases)):
            out.append((f"W{i}", w))
            out.append((f"b{i}", b))
        return out


def init_mlp(dims, seed: int = 0) -> MlpParams:
    """Uniform Glorot-style initialization, deterministic per seed."""
    if len(dims) < 2:
        raise ShapeMismatch("dims needs at least [in, out]")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(layer_weights=weights, layer_biases=biases, dims=list(dims))


def forward(
    params: MlpParams,
    x,
    dropout_p: float = 0.0,
    seed: int = 0,
    train_mode: bool = False,
):
    """Run the network; returns (H, logits, cache) where H is the
    penultimate activation (the embedding the classifier consumes, with its
    dropout already applied in train mode)."""
    x = as_matrix(x, "x")
    if x.shape[1] != params.dims[0]:
        raise ShapeMismatch(
            f"input has {x.shape[1]} features, network expects {params.dims[0]}"
        )
    rng = np.random.default_rng(seed)
    activation = x
    layers = []
    n_encoder = params.n_layers - 1
    for i in range(n_encoder):
        pre = activation @ params.layer_weights[i] + params.layer_biases[i]
        post = np.maximum(pre, 0.0)
        mask = None
        if train_mode and dropout_p > 0.0:
            mask = (rng.random(post.shape) >= dropout_p) / (1.0 - dropout_p)
            post = post * mask
        layers.append({"input": activation, "pre": pre, "mask": mask})
        activation = post
    h = activation
    logits = h @ params.layer_weights[-1] + params.layer_biases[-1]
    cache = {"layers": layers, "h": h, "x": x}
    return h, logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels, mask):
    """Mean negative log-likelihood over ``mask`` plus the logits gradient
    (zero outside the mask); row-max stabilized."""
    logits = as_matrix(logits, "logits")
    idx = np.asarray(mask, dtype=np.int64).ravel()
    if idx.size == 0:
        raise EmptyMask("cross_entropy needs a non-empty index set")
    labels = np.asarray(labels, dtype=np.int64)
    y = labels[idx]
    if y.min() < 0 or y.max() >= logits.shape[1]:
        raise ShapeMismatch("mask selects a node without a valid label")
    sub = logits[idx]
    z = sub - sub.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z[np.arange(idx.size), y]))
    probs = softmax(sub)
    probs[np.arange(idx.size), y] -= 1.0
    grad = np.zeros_like(logits)
    grad[idx] = probs / idx.size
    return loss, grad


@dataclass
class GradientBundle:
    """Per-parameter gradients mirroring MlpParams, plus the total gradient
    that reached the embedding layer."""

    weight_grads: list
    bias_grads: list
    grad_h: np.ndarray


def backward(
    params: MlpParams, cache, grad_logits, external_grad_h=None
) -> GradientBundle:
    """Exact gradients of (supervised loss + <external_grad_h, H>) w.r.t.
    every parameter; ``external_grad_h`` is injected at the embedding layer
    and propagated down the encoder."""
    grad_logits = as_matrix(grad_logits, "grad_logits")
    h = cache["h"]
    weight_grads = [None] * params.n_layers
    bias_grads = [None] * params.n_layers

    weight_grads[-1] = h.T @ grad_logits
    bias_grads[-1] = grad_logits.sum(axis=0)
    grad_h = grad_logits @ params.layer_weights[-1].T
    if external_grad_h is not None:
        external_grad_h = as_matrix(external_grad_h, "external_grad_h")
        if external_grad_h.shape != h.shape:
            raise ShapeMismatch(
                f"external_grad_h shape {external_grad_h.shape} != H shape {h.shape}"
            )
        grad_h = grad_h + external_grad_h

    grad_act = grad_h
    for i in reversed(range(params.n_layers - 1)):
        layer = cache["layers"][i]
        g = grad_act
        if layer["mask"] is not None:
            g = g * layer["mask"]
        g = g * (layer["pre"] > 0.0)
        weight_grads[i] = layer["input"].T @ g
        bias_grads[i] = g.sum(axis=0)
        grad_act = g @ params.layer_weights[i].T

    return GradientBundle(
        weight_grads=weight_grads, bias_grads=bias_grads, grad_h=grad_h
    )


@dataclass
class AdamState:
    """First/second moment buffers and step count for Adam."""

    first_moment: list
    second_moment: list
    step: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    weight_decay: float = 0.0


def adam_init(params: MlpParams, lr: float = 1e-2, weight_decay: float = 0.0,
              beta1: float = 0.9, beta2: float = 0.999, eps_adam: float = 1e-8) -> AdamState:
    zeros = lambda arrs: [np.zeros_like(a) for a in arrs]
    return AdamState(
        first_moment=zeros(params.layer_weights) + zeros(params.layer_biases),
        second_moment=zeros(params.layer_weights) + zeros(params.layer_biases),
        step=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps_adam=eps_adam,
        weight_decay=weight_decay,
    )


def adam_step(params: MlpParams, grads: GradientBundle, state: AdamState):
    """Standard Adam with bias correction and decoupled weight decay
    (applied to weights only); updates params/state in place and returns
    them."""
    state.step += 1
    t = state.step
    arrays = params.layer_weights + params.layer_biases
    gradients = grads.weight_grads + grads.bias_grads
    n_w = len(params.layer_weights)
    for i, (a, g) in enumerate(zip(arrays, gradients)):
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        update = m_hat / (np.sqrt(v_hat) + state.eps_adam)
        if state.weight_decay > 0.0 and i < n_w:
            update = update + state.weight_decay * a
        a -= state.lr * update
    return params, state


CHECKPOINT_VERSION = 1


def save_checkpoint(params: MlpParams, path) -> None:
    """Write named parameter arrays plus dims/activation/version into one
    .npz file."""
    payload = {name: arr for name, arr in params.flat_arrays()}
    payload["dims"] = np.asarray(params.dims, dtype=np.int64)
    payload["activation"] = np.asarray([params.activation])
    payload["version"] = np.asarray([CHECKPOINT_VERSION], dtype=np.int64)
    np.savez(path, **payload)


def load_checkpoint(path) -> MlpParams:
    with np.load(path) as blob:
        version = int(blob["version"][0])
        if version != CHECKPOINT_VERSION:
            raise ShapeMismatch(f"unsupported checkpoint version {version}")
        dims = [int(d) for d in blob["dims"]]
        activation = str(blob["activation"][0]) if "activation" in blob else "relu"
        n_layers = len(dims) - 1
        weights = [blob[f"W{i}"].astype(np.float64) for i in range(n_layers)]
        biases = [blob[f"b{i}"].astype(np.float64) for i in range(n_layers)]
    return MlpParams(layer_weights=weights, layer_biases=biases, dims=dims,
                     activation=activation)
