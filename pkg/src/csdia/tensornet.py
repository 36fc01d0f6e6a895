"""Small differentiable-network toolkit on float64 numpy arrays.

Layers take batch-first arrays and cache what they need for ``backward``.
``backward`` returns the input gradient and *accumulates* parameter
gradients into ``layer.grads`` until ``zero_grad`` is called, so summing
per-example backward passes and one batched pass give the same result.
"""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator):
        pass

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}: backward called before forward")
        return self._cache


def _uniform_init(rng, shape, fan_in):
    s = np.sqrt(6.0 / fan_in)
    return rng.uniform(-s, s, size=shape).astype(DTYPE)


class Linear(Layer):
    """y = x W^T + b with W of shape (out, in)."""

    kind = "linear"

    def __init__(self, n_in: int, n_out: int):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = {"W": np.zeros((n_out, n_in), DTYPE), "b": np.zeros(n_out, DTYPE)}
        self.zero_grad()

    def init_params(self, rng):
        self.params["W"][...] = _uniform_init(rng, (self.n_out, self.n_in), self.n_in)
        self.params["b"][...] = 0.0

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"linear: expected input (N, {self.n_in}), got {x.shape}")
        self._cache = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, grad):
        x = self._cached()
        self.grads["W"] += grad.T @ x
        self.grads["b"] += grad.sum(axis=0)
        return grad @ self.params["W"]


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._cache = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return grad * self._cached()


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached())


class Conv2d(Layer):
    """3x3 convolution, stride 1, zero padding 1 (cross-correlation form)."""

    kind = "conv2d"

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        self.input_grad = True  # callers that never use dx can switch this off
        self.params = {"W": np.zeros((c_out, c_in, 3, 3), DTYPE), "b": np.zeros(c_out, DTYPE)}
        self.zero_grad()

    def init_params(self, rng):
        self.params["W"][...] = _uniform_init(rng, (self.c_out, self.c_in, 3, 3), self.c_in * 9)
        self.params["b"][...] = 0.0

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeError(f"conv2d: expected input (N, {self.c_in}, H, W), got {x.shape}")
        n, c, h, w = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        # im2col: one row per output pixel, columns ordered (channel, ki, kj)
        cols = sliding_window_view(xp, (3, 3), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
        cols = cols.reshape(n * h * w, c * 9)
        self._cache = (x.shape, cols)
        out = cols @ self.params["W"].reshape(self.c_out, -1).T + self.params["b"]
        return out.reshape(n, h, w, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, grad):
        shape, cols = self._cached()
        n, c, h, w = shape
        g = grad.transpose(0, 2, 3, 1).reshape(n * h * w, self.c_out)
        self.grads["W"] += (g.T @ cols).reshape(self.params["W"].shape)
        self.grads["b"] += g.sum(axis=0)
        if not self.input_grad:
            return None
        dcols = (g @ self.params["W"].reshape(self.c_out, -1)).reshape(n, h, w, c, 3, 3)
        dxp = np.zeros((n, c, h + 2, w + 2), DTYPE)
        for i in range(3):
            for j in range(3):
                dxp[:, :, i:i + h, j:j + w] += dcols[..., i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, 1:-1, 1:-1]


class MaxPool2(Layer):
    """2x2 max pool, stride 2; ties go to the first element in row-major order."""

    kind = "maxpool2"

    def forward(self, x):
        *lead, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool2: spatial dims must be even, got {h}x{w}")
        q = x.reshape(*lead, h // 2, 2, w // 2, 2)
        a, b, c, d = q[..., 0, :, 0], q[..., 0, :, 1], q[..., 1, :, 0], q[..., 1, :, 1]
        out = np.maximum(np.maximum(a, b), np.maximum(c, d))
        # winner masks, earliest position wins ties
        ma = a == out
        mb = (b == out) & ~ma
        mc = (c == out) & ~(ma | mb)
        md = ~(ma | mb | mc)
        self._cache = (x.shape, (ma, mb, mc, md))
        return out

    def backward(self, grad):
        shape, masks = self._cached()
        *lead, h, w = shape
        dx = np.zeros(shape, DTYPE)
        q = dx.reshape(*lead, h // 2, 2, w // 2, 2)
        for (i, j), m in zip(((0, 0), (0, 1), (1, 0), (1, 1)), masks):
            q[..., i, :, j] = np.where(m, grad, 0.0)
        return dx


class Sequential(Layer):
    kind = "sequential"

    def __init__(self, layers: Sequence[Layer]):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def init_params(self, rng):
        for layer in self.layers:
            layer.init_params(rng)

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def named_params(self, prefix: str = "") -> list[tuple[str, np.ndarray, dict, str]]:
        out = []
        for i, layer in enumerate(self.layers):
            for k in layer.params:
                out.append((f"{prefix}{i}.{k}", layer.params[k], layer.grads, k))
        return out


def init_params(layer: Layer, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-s, s) weights with s = sqrt(6 / fan_in), zero biases."""
    layer.init_params(rng)
    return layer.params


# --- loss ------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss and gradient w.r.t. the logits for a single example."""
    logits = np.asarray(logits, dtype=DTYPE)
    n = logits.shape[-1]
    if n < 2:
        raise ValueError("need at least 2 classes")
    if not 0 <= target < n:
        raise ValueError(f"target {target} outside [0, {n})")
    z = logits - logits.max()
    log_p = z - np.log(np.exp(z).sum())
    p = np.exp(log_p)
    grad = p.copy()
    grad[target] -= 1.0
    return float(-log_p[target]), grad


def batch_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed loss over a batch and per-example logit gradients."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(len(targets))
    grad = np.exp(log_p)
    grad[rows, targets] -= 1.0
    return float(-log_p[rows, targets].sum()), grad


# --- optimiser -------------------------------------------------------------

class SGD:
    """Heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v."""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: dict[int, np.ndarray] = {}

    def step(self, params: Iterable[np.ndarray], grads: Iterable[np.ndarray]):
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeError(f"sgd: parameter {p.shape} vs gradient {g.shape}")
            v = self.velocity.get(id(p))
            if v is None:
                v = self.velocity[id(p)] = np.zeros_like(p)
            v *= self.momentum
            v += g
            p -= self.learning_rate * v


def sgd_step(opt: SGD, params, grads):
    opt.step(params, grads)
    return params


# --- gradient checking -----------------------------------------------------

def relative_error(a: np.ndarray, n: np.ndarray) -> float:
    a = np.asarray(a, DTYPE)
    n = np.asarray(n, DTYPE)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))))


def numeric_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return g


def grad_check(network: Layer, x: np.ndarray, target: int, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``network`` maps a batch of one input to logits; the loss is softmax
    cross-entropy. Checks every parameter and the input itself.
    """
    x = np.array(x, dtype=DTYPE)

    def loss() -> float:
        return softmax_cross_entropy(network.forward(x)[0], target)[0]

    network.zero_grad()
    _, g_logits = softmax_cross_entropy(network.forward(x)[0], target)
    g_input = network.backward(g_logits[None, :])
    worst = relative_error(g_input, numeric_gradient(loss, x, eps))
    layers = network.layers if isinstance(network, Sequential) else [network]
    for layer in layers:
        for k, p in layer.params.items():
            worst = max(worst, relative_error(layer.grads[k], numeric_gradient(loss, p, eps)))
    return worst


# --- checkpoints -----------------------------------------------------------

def save_params(path, params: dict[str, np.ndarray], header: dict | None = None):
    """Write an ``.npz`` archive: one float64 row-major array per parameter name.

    ``header`` (JSON-serialisable) is stored as the UTF-8 bytes of entry ``__header__``.
    """
    arrays = {k: np.ascontiguousarray(v, dtype=DTYPE) for k, v in params.items()}
    if "__header__" in arrays:
        raise ValueError("'__header__' is reserved")
    blob = json.dumps(header or {}, sort_keys=True).encode("utf-8")
    arrays["__header__"] = np.frombuffer(blob, dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(bytes(z["__header__"]).decode("utf-8"))
        params = {k: z[k] for k in z.files if k != "__header__"}
    return params, header
