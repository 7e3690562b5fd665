"""Small dense value network with backprop, Adam, and a versioned binary format.

All parameters live in one flat float64 vector; per-layer weight and bias
arrays are views into it, so the optimizer updates everything with a handful
of vector operations.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RELRMLP\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIcI")  # magic, version, meta length, endianness, n layer sizes


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class ModelFormatError(ValueError):
    """A model file could not be parsed."""


class ModelVersionError(ModelFormatError):
    """A model file was written by an incompatible format version."""


def default_sizes(n_features: int = 22) -> list[int]:
    return [n_features, 10 * n_features, n_features // 2, 1]


class Adam:
    # moments of parameters whose gradient stays zero (dead ReLU units) decay
    # geometrically into subnormal floats, which are very slow on x86; values
    # this small cannot move a parameter, so they are flushed to zero
    TINY = 1e-200
    FLUSH_EVERY = 64

    def __init__(self, n_params: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-7):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self._buf = np.empty(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        m, v, buf = self.m, self.v, self._buf
        m *= self.beta1
        np.multiply(grad, 1 - self.beta1, out=buf)
        m += buf
        v *= self.beta2
        np.multiply(grad, grad, out=buf)
        buf *= 1 - self.beta2
        v += buf
        lr_t = self.lr * np.sqrt(1 - self.beta2 ** self.t) / (1 - self.beta1 ** self.t)
        np.sqrt(v, out=buf)
        buf += self.eps
        np.divide(m, buf, out=buf)
        buf *= lr_t
        params -= buf
        if self.t % self.FLUSH_EVERY == 0:
            m[np.abs(m) < self.TINY] = 0.0
            v[v < self.TINY] = 0.0


class SGD:
    def __init__(self, n_params: int, lr: float = 1e-2):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


OPTIMIZERS = {"adam": Adam, "sgd": SGD}


class Mlp:
    """Dense network, ReLU hidden layers, linear scalar output."""

    def __init__(self, sizes=None, rng: np.random.Generator | int | None = None,
                 learning_rate: float = 1e-3, optimizer: str = "adam"):
        self.sizes = [int(s) for s in (sizes or default_sizes())]
        if len(self.sizes) < 2 or self.sizes[-1] != 1:
            raise ValueError(f"layer sizes must end in a single output, got {self.sizes}")
        self.learning_rate = learning_rate
        self.optimizer_name = optimizer
        shapes = list(zip(self.sizes[:-1], self.sizes[1:]))
        self.n_params = sum(a * b + b for a, b in shapes)
        self.params = np.zeros(self.n_params)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        for a, b in shapes:
            self.weights.append(self.params[off:off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(self.params[off:off + b])
            off += b
        if rng is not None:
            self.init(rng)
        self.optimizer = None

    def init(self, rng) -> "Mlp":
        rng = np.random.default_rng(rng)
        for w in self.weights:
            lim = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-lim, lim, size=w.shape)
        for b in self.biases:
            b[...] = 0.0
        self.optimizer = None
        return self

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    # -- evaluation -------------------------------------------------------
    def forward(self, x):
        """Q estimate for one input vector (returns float) or a batch of rows (returns 1-D array)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[-1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input features, got {h.shape[-1]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                np.maximum(h, 0.0, out=h)
        out = h[:, 0]
        return float(out[0]) if single else out

    __call__ = forward

    def predict(self, X, chunk: int = 65536) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[0] <= chunk:
            return self.forward(X)
        return np.concatenate([self.forward(X[i:i + chunk]) for i in range(0, X.shape[0], chunk)])

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean squared error over the batch and its gradient w.r.t. the flat parameters."""
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        err = acts[-1][:, 0] - y
        m = X.shape[0]
        loss = float(err @ err) / m
        grad = np.empty(self.n_params)
        g = (2.0 / m) * err[:, None]
        off = self.n_params
        for i in range(last, -1, -1):
            w = self.weights[i]
            a_in = acts[i]
            nb = w.shape[1]
            grad[off - nb:off] = g.sum(axis=0)
            off -= nb
            grad[off - w.size:off] = (a_in.T @ g).ravel()
            off -= w.size
            if i > 0:
                g = (g @ w.T) * (a_in > 0)
        return loss, grad

    # -- training ---------------------------------------------------------
    def fit(self, X, y, epochs: int = 10, batch_size: int = 32, rng=None) -> list[float]:
        """Shuffled mini-batch descent on squared error. Returns the mean loss of each epoch."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
            raise ValueError(f"need matching non-empty X and y, got {X.shape[0]} and {y.shape[0]}")
        rng = np.random.default_rng(rng)
        if self.optimizer is None:
            self.optimizer = OPTIMIZERS[self.optimizer_name](self.n_params, lr=self.learning_rate)
        opt = self.optimizer
        n = X.shape[0]
        trace = []
        for _ in range(epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                loss, grad = self.loss_and_grad(X[idx], y[idx])
                total += loss * idx.size
                opt.step(self.params, grad)
            epoch_loss = total / n
            if not np.isfinite(epoch_loss) or not np.all(np.isfinite(self.params)):
                raise DivergenceError(f"non-finite training loss after {len(trace) + 1} epochs")
            trace.append(epoch_loss)
        return trace

    # -- persistence ------------------------------------------------------
    def copy(self) -> "Mlp":
        other = Mlp(self.sizes, learning_rate=self.learning_rate, optimizer=self.optimizer_name)
        other.params[:] = self.params
        return other

    def save(self, path, metadata: dict | None = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = json.dumps({"activation": "relu", "output": "linear", **(metadata or {})},
                          sort_keys=True).encode()
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(meta), b"<", len(self.sizes)))
            fh.write(struct.pack(f"<{len(self.sizes)}I", *self.sizes))
            fh.write(meta)
            fh.write(self.params.astype("<f8").tobytes())
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "Mlp":
        mlp, _ = load_with_metadata(path)
        return mlp

    def dump_text(self) -> str:
        lines = [f"sizes {' '.join(map(str, self.sizes))}"]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"layer {i} weights {w.shape[0]}x{w.shape[1]}")
            lines.extend(" ".join(repr(float(x)) for x in row) for row in w)
            lines.append(f"layer {i} bias {b.shape[0]}")
            lines.append(" ".join(repr(float(x)) for x in b))
        return "\n".join(lines) + "\n"


def load_with_metadata(path) -> tuple[Mlp, dict]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"{path}: file too short for a model header ({len(data)} bytes)")
    magic, version, meta_len, endian, n_sizes = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    if endian != b"<":
        raise ModelFormatError(f"{path}: unsupported byte order {endian!r}")
    off = _HEADER.size
    if len(data) < off + 4 * n_sizes + meta_len:
        raise ModelFormatError(f"{path}: truncated header (layer sizes / metadata)")
    sizes = list(struct.unpack_from(f"<{n_sizes}I", data, off))
    off += 4 * n_sizes
    try:
        meta = json.loads(data[off:off + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt metadata block: {exc}") from None
    off += meta_len
    mlp = Mlp(sizes)
    body = data[off:]
    if len(body) != 8 * mlp.n_params:
        shapes = ", ".join(f"{a}x{b}+{b}" for a, b in zip(sizes[:-1], sizes[1:]))
        raise ModelFormatError(
            f"{path}: layer sizes {sizes} ({shapes}) need {8 * mlp.n_params} parameter bytes, "
            f"found {len(body)}")
    mlp.params[:] = np.frombuffer(body, dtype="<f8")
    return mlp, meta
