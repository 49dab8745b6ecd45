"""Minimal dense/convolutional network engine with reverse-mode gradients.

Just enough machinery for the trend investors' Q-network: 1-D convolution,
max-pooling, ReLU, dense layers, a masked mean-squared-error loss, Adam,
and soft parameter blending between two networks. Arrays are plain numpy;
convolution inputs are shaped (batch, channels, length) and dense inputs
(batch, features).

Layers keep per-shape scratch buffers so steady-state passes allocate
nothing large (allocator churn dominates runtime otherwise at these
sizes). Consequences: a network instance is single-threaded, must not run
overlapping forward/backward pairs, and the array returned by forward()
is only valid until the next pass on the same instance. Parameter
gradients are freshly allocated each backward pass and safe to keep.
"""

from __future__ import annotations

import copy as _copy

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _glorot_uniform(rng: np.random.Generator, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


class _Scratch:
    """Per-shape reusable work arrays."""

    def __init__(self):
        self._arrays: dict = {}

    def get(self, key, shape, dtype, zero=False):
        arr = self._arrays.get(key)
        if arr is None or arr.shape != shape or arr.dtype != dtype:
            arr = np.zeros(shape, dtype) if zero else np.empty(shape, dtype)
            self._arrays[key] = arr
        elif zero:
            arr.fill(0)
        return arr


def _grad_buffer(layer, name: str, param: np.ndarray) -> np.ndarray:
    """Persistent gradient array matching `param`; reused across passes so
    consolidated networks can point it into one flat gradient vector."""
    grad = getattr(layer, name, None)
    if grad is None or grad.shape != param.shape or grad.dtype != param.dtype:
        grad = np.empty_like(param)
        setattr(layer, name, grad)
    return grad


class Conv1d:
    """1-D convolution (cross-correlation) with stride, no padding.

    Output length is floor((L - kernel) / stride) + 1.
    """

    def __init__(self, in_channels, out_channels, kernel, stride, rng, dtype=np.float64):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.w = _glorot_uniform(
            rng,
            (out_channels, in_channels, kernel),
            in_channels * kernel,
            out_channels * kernel,
            dtype,
        )
        self.b = np.zeros(out_channels, dtype=dtype)
        self._ws = _Scratch()

    def out_length(self, length: int) -> int:
        return (length - self.kernel) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        batch, channels, length = x.shape
        n_out = self.out_length(length)
        k, fan = self.kernel, channels * self.kernel
        windows = sliding_window_view(x, k, axis=2)[:, :, :: self.stride, :]
        cols = self._ws.get("cols", (batch, n_out, fan), x.dtype)
        np.copyto(cols.reshape(batch, n_out, channels, k), windows.transpose(0, 2, 1, 3))
        flat = self._ws.get("flat", (batch * n_out, self.out_channels), x.dtype)
        np.matmul(cols.reshape(-1, fan), self.w.reshape(self.out_channels, -1).T, out=flat)
        flat += self.b
        out = self._ws.get("out", (batch, self.out_channels, n_out), x.dtype)
        np.copyto(out, flat.reshape(batch, n_out, self.out_channels).transpose(0, 2, 1))
        self._cols = cols
        self._x_shape = x.shape
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        batch, _, n_out = dy.shape
        fan = self.in_channels * self.kernel
        dyt = self._ws.get("dyt", (batch, n_out, self.out_channels), dy.dtype)
        np.copyto(dyt, dy.transpose(0, 2, 1))
        flat_dy = dyt.reshape(-1, self.out_channels)
        w_grad = _grad_buffer(self, "w_grad", self.w)
        np.matmul(flat_dy.T, self._cols.reshape(-1, fan), out=w_grad.reshape(self.out_channels, fan))
        np.sum(dy, axis=(0, 2), out=_grad_buffer(self, "b_grad", self.b))
        dcols = self._ws.get("dcols", (batch * n_out, fan), dy.dtype)
        np.matmul(flat_dy, self.w.reshape(self.out_channels, -1), out=dcols)
        dwin = dcols.reshape(batch, n_out, self.in_channels, self.kernel).transpose(0, 2, 1, 3)
        dx = self._ws.get("dx", self._x_shape, dy.dtype, zero=True)
        # Windows overlap when stride < kernel; accumulate one offset at a time.
        for j in range(self.kernel):
            dx[:, :, j : j + self.stride * n_out : self.stride] += dwin[:, :, :, j]
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def param_grads(self):
        return {"w": self.w_grad, "b": self.b_grad}


class MaxPool1d:
    """Non-overlapping max pooling; window and stride are both `width`."""

    def __init__(self, width):
        self.width = width
        self._ws = _Scratch()

    def out_length(self, length: int) -> int:
        return (length - self.width) // self.width + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        batch, channels, length = x.shape
        n_out = self.out_length(length)
        w = self.width
        xw = x[:, :, : n_out * w].reshape(batch, channels, n_out, w)
        shape = (batch, channels, n_out)
        # Window-first contiguous layout keeps every slice below SIMD-friendly
        # contiguous ops; reductions over a tiny trailing axis are far slower.
        lanes = self._ws.get("lanes", (w, *shape), x.dtype)
        np.copyto(lanes, xw.transpose(3, 0, 1, 2))
        out = self._ws.get("out", shape, x.dtype)
        np.copyto(out, lanes[0])
        # Running tournament; ties keep the earliest index, like argmax.
        arg = self._ws.get("arg", shape, np.int8, zero=True)
        better = self._ws.get("better", shape, np.bool_)
        scratch = self._ws.get("scratch8", shape, np.int8)
        for j in range(1, w):
            np.greater(lanes[j], out, out=better)
            np.maximum(out, lanes[j], out=out)
            raised = better.view(np.int8)
            np.subtract(np.int8(j), arg, out=scratch)
            scratch *= raised
            arg += scratch
        self._argmax = arg
        self._x_shape = x.shape
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        batch, channels, n_out = dy.shape
        w = self.width
        covered = n_out * w
        shape = (batch, channels, n_out)
        lanes = self._ws.get("dlanes", (w, *shape), dy.dtype)
        hit = self._ws.get("hit", shape, np.bool_)
        for j in range(w):
            np.equal(self._argmax, np.int8(j), out=hit)
            np.multiply(dy, hit, out=lanes[j])
        dx = self._ws.get("dx", self._x_shape, dy.dtype, zero=True)
        np.copyto(
            dx[:, :, :covered].reshape(batch, channels, n_out, w),
            lanes.transpose(1, 2, 3, 0),
        )
        return dx

    def params(self):
        return {}

    def param_grads(self):
        return {}


class Relu:
    def __init__(self):
        self._ws = _Scratch()

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = self._ws.get("out", x.shape, x.dtype)
        np.maximum(x, 0, out=out)
        mask = self._ws.get("mask", x.shape, np.bool_)
        np.greater(x, 0, out=mask)
        self._mask = mask
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = self._ws.get("dx", dy.shape, dy.dtype)
        np.multiply(dy, self._mask, out=dx)
        return dx

    def params(self):
        return {}

    def param_grads(self):
        return {}


class Flatten:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._x_shape)

    def params(self):
        return {}

    def param_grads(self):
        return {}


class Dense:
    def __init__(self, in_features, out_features, rng, dtype=np.float64):
        self.w = _glorot_uniform(
            rng, (in_features, out_features), in_features, out_features, dtype
        )
        self.b = np.zeros(out_features, dtype=dtype)
        self._ws = _Scratch()

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = self._ws.get("out", (x.shape[0], self.w.shape[1]), x.dtype)
        np.matmul(x, self.w, out=out)
        out += self.b
        self._x = x
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        np.matmul(self._x.T, dy, out=_grad_buffer(self, "w_grad", self.w))
        np.sum(dy, axis=0, out=_grad_buffer(self, "b_grad", self.b))
        dx = self._ws.get("dx", (dy.shape[0], self.w.shape[0]), dy.dtype)
        np.matmul(dy, self.w.T, out=dx)
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def param_grads(self):
        return {"w": self.w_grad, "b": self.b_grad}


class Network:
    """An ordered stack of layers with a shared parameter listing.

    `named_layers` is a list of (name, layer) pairs; parameter arrays are
    exposed in a stable order as "<layer>.<param>" so optimizers, soft
    updates, and snapshots all agree on alignment.
    """

    def __init__(self, named_layers, input_shape=None):
        self.named_layers = list(named_layers)
        self.input_shape = input_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        for _, layer in self.named_layers:
            x = layer.forward(x)
        return x

    def forward_vector(self, v: np.ndarray) -> np.ndarray:
        """Run a single unbatched input; validates length for shaped networks."""
        v = np.asarray(v)
        if self.input_shape is not None and v.shape != (self.input_shape[-1],):
            raise ValueError(
                f"input length must be {self.input_shape[-1]}, got {v.shape}"
            )
        x = v.reshape((1, *self.input_shape)) if self.input_shape else v[None, :]
        return self.forward(x)[0]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for _, layer in reversed(self.named_layers):
            dy = layer.backward(dy)
        return dy

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, layer in self.named_layers:
            for suffix, arr in layer.params().items():
                out.append((f"{name}.{suffix}", arr))
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for _, layer in self.named_layers:
            for arr in layer.param_grads().values():
                out.append(arr)
        return out

    def param_arrays(self) -> list[np.ndarray]:
        return [arr for _, arr in self.parameters()]

    def copy(self) -> "Network":
        if getattr(self, "flat_params", None) is not None:
            raise ValueError("copy the network before consolidating it")
        return _copy.deepcopy(self)

    flat_params: np.ndarray | None = None
    flat_grads: np.ndarray | None = None

    def consolidate(self) -> None:
        """Repack all parameters and gradients into two flat vectors.

        Layer arrays become views into the vectors, so whole-network
        operations (Adam, soft updates, snapshots of everything) run as a
        couple of long vector ops instead of dozens of small ones.
        """
        if self.flat_params is not None:
            return
        named = self.parameters()
        total = sum(arr.size for _, arr in named)
        dtype = named[0][1].dtype
        flat_p = np.empty(total, dtype=dtype)
        flat_g = np.zeros(total, dtype=dtype)
        layer_by_name = dict(self.named_layers)
        offset = 0
        for name, arr in named:
            lname, suffix = name.split(".")
            view_p = flat_p[offset : offset + arr.size].reshape(arr.shape)
            view_g = flat_g[offset : offset + arr.size].reshape(arr.shape)
            view_p[...] = arr
            setattr(layer_by_name[lname], suffix, view_p)
            setattr(layer_by_name[lname], suffix + "_grad", view_g)
            offset += arr.size
        self.flat_params = flat_p
        self.flat_grads = flat_g


def masked_mse_loss(
    net: Network, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """MSE on the chosen-action outputs only; returns (loss, q_values).

    Leaves gradients populated on every layer of `net` via backward().
    """
    q = net.forward(states)
    rows = np.arange(len(actions))
    resid = q[rows, actions] - targets
    loss = float(np.mean(resid * resid))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * resid / len(actions)
    net.backward(dq)
    return loss, q


class Adam:
    """Adam with bias correction over a fixed list of parameter arrays."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p) for p in params]
        self._v = [np.zeros_like(p) for p in params]
        self._scratch = [np.empty_like(p) for p in params]

    def step(self, params, grads) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for p, g, m, v, tmp in zip(params, grads, self._m, self._v, self._scratch):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - b2
            v += tmp
            np.divide(v, bc2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.learning_rate / bc1
            p -= tmp


def soft_update(target: Network, online: Network, tau: float) -> None:
    """Blend target parameters toward the online network: t = tau*o + (1-tau)*t."""
    if target.flat_params is not None and online.flat_params is not None:
        buf = getattr(target, "_blend_buf", None)
        if buf is None or buf.shape != target.flat_params.shape:
            buf = np.empty_like(target.flat_params)
            target._blend_buf = buf
        np.multiply(online.flat_params, tau, out=buf)
        target.flat_params *= 1.0 - tau
        target.flat_params += buf
        return
    for tgt, onl in zip(target.param_arrays(), online.param_arrays()):
        tgt *= 1.0 - tau
        tgt += tau * onl


def build_q_network(
    rng: np.random.Generator,
    input_length: int = 512,
    n_actions: int = 7,
    dtype=np.float64,
) -> Network:
    """Q-network over a price-history window.

    Two conv+pool stages extract local structure from the input series,
    followed by a four-layer dense head with one output per action.
    """
    conv1 = Conv1d(1, 16, kernel=8, stride=4, rng=rng, dtype=dtype)
    pool1 = MaxPool1d(4)
    conv2 = Conv1d(16, 32, kernel=4, stride=2, rng=rng, dtype=dtype)
    pool2 = MaxPool1d(2)
    length = pool2.out_length(conv2.out_length(pool1.out_length(conv1.out_length(input_length))))
    flat = 32 * length
    layers = [
        ("conv1", conv1),
        ("relu1", Relu()),
        ("pool1", pool1),
        ("conv2", conv2),
        ("relu2", Relu()),
        ("pool2", pool2),
        ("flatten", Flatten()),
        ("dense1", Dense(flat, 256, rng, dtype)),
        ("relu3", Relu()),
        ("dense2", Dense(256, 128, rng, dtype)),
        ("relu4", Relu()),
        ("dense3", Dense(128, 64, rng, dtype)),
        ("relu5", Relu()),
        ("dense4", Dense(64, n_actions, rng, dtype)),
    ]
    return Network(layers, input_shape=(1, input_length))


def weight_snapshot(net: Network) -> list[dict]:
    """Portable weight listing: (name, shape, row-major values) per array."""
    return [
        {"name": name, "shape": list(arr.shape), "values": arr.ravel().tolist()}
        for name, arr in net.parameters()
    ]


def load_weight_snapshot(net: Network, snapshot: list[dict]) -> None:
    """Load a `weight_snapshot` document into a structurally matching network."""
    params = dict(net.parameters())
    if set(params) != {entry["name"] for entry in snapshot}:
        raise ValueError("snapshot layer names do not match the network")
    for entry in snapshot:
        arr = params[entry["name"]]
        values = np.asarray(entry["values"], dtype=arr.dtype).reshape(entry["shape"])
        if values.shape != arr.shape:
            raise ValueError(f"shape mismatch for {entry['name']}")
        arr[...] = values


def flatten_weights(net: Network) -> np.ndarray:
    """All parameters concatenated into one vector, in listing order."""
    return np.concatenate([arr.ravel() for arr in net.param_arrays()])
