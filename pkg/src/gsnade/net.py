"""Feedforward encoder with manual backprop, SGD, init, and checkpoints.

The encoder maps a corrupted input to the conditional bias vectors of the
reconstruction distribution:

    hidden = act(W_in @ x + b_in)
    cond_c = W_head_c @ hidden + b_head_c        (reconstruction hidden biases)
    cond_b = W_head_b @ hidden + b_head_b        (reconstruction output biases)

All arithmetic is float64; every backward pass here is checked against
central finite differences in the test suite.  Forward functions accept a
single vector (d,) or a batch (B, d) and preserve that layout.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

TANH = "tanh"
SIGMOID = "sigmoid"


class DivergenceError(RuntimeError):
    """Non-finite loss or gradient encountered (maps to CLI exit code 3)."""

    def __init__(self, message, model=None, reports=None):
        super().__init__(message)
        self.model = model
        self.reports = reports or []


def sigmoid(z, out=None):
    """Overflow-safe logistic function (scipy's single-pass ufunc)."""
    return expit(z, out=out) if out is not None else expit(z)


def log_sigmoid(z):
    """log(sigmoid(z)) without overflow: -log(1 + exp(-z))."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


@dataclass
class EncoderParams:
    W_in: np.ndarray  # (n_hidden, n_dims)
    b_in: np.ndarray  # (n_hidden,)
    W_head_c: np.ndarray  # (cond_c_dim, n_hidden)
    b_head_c: np.ndarray  # (cond_c_dim,)
    W_head_b: np.ndarray | None  # (cond_b_dim, n_hidden); None when output
    b_head_b: np.ndarray | None  # biases are not conditioned
    activation: str = TANH

    @property
    def n_dims(self):
        return self.W_in.shape[1]

    @property
    def cond_b_dim(self):
        return 0 if self.W_head_b is None else self.W_head_b.shape[0]

    def tensors(self):
        out = {
            "encoder.W_in": self.W_in,
            "encoder.b_in": self.b_in,
            "encoder.W_head_c": self.W_head_c,
            "encoder.b_head_c": self.b_head_c,
        }
        if self.W_head_b is not None:
            out["encoder.W_head_b"] = self.W_head_b
            out["encoder.b_head_b"] = self.b_head_b
        return out


def init_encoder(n_dims, n_hidden, cond_c_dim, cond_b_dim, seed,
                 activation=TANH, scheme="uniform_fan"):
    """Build encoder parameters; cond_b_dim=0 disables the output-bias head."""
    rng = np.random.default_rng(seed)
    p = EncoderParams(
        W_in=init_matrix((n_hidden, n_dims), scheme, rng),
        b_in=np.zeros(n_hidden),
        W_head_c=init_matrix((cond_c_dim, n_hidden), scheme, rng),
        b_head_c=np.zeros(cond_c_dim),
        W_head_b=init_matrix((cond_b_dim, n_hidden), scheme, rng) if cond_b_dim else None,
        b_head_b=np.zeros(cond_b_dim) if cond_b_dim else None,
        activation=activation,
    )
    return p


def init_matrix(shape, scheme, rng):
    """uniform_fan: U(+-sqrt(6/(fan_in+fan_out))); zeros: all zero."""
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "uniform_fan":
        fan_out, fan_in = shape[0], shape[-1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)
    raise ValueError(f"unknown init scheme {scheme!r}")


def _activate(z, activation):
    if activation == TANH:
        return np.tanh(z)
    if activation == SIGMOID:
        return sigmoid(z)
    raise ValueError(f"unknown activation {activation!r}")


def _activation_grad_from_output(h, activation):
    if activation == TANH:
        return 1.0 - h * h
    return h * (1.0 - h)


def encoder_forward(p: EncoderParams, x_tilde):
    """Return (cond_c, cond_b, cache).  cond_b is zeros when the head is off.

    The cache holds what backward needs; forward is pure otherwise.
    """
    x = np.asarray(x_tilde, dtype=np.float64)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    if not np.all(np.isfinite(xb)):
        raise ValueError("encoder input is not finite")
    if xb.shape[1] != p.n_dims:
        raise ValueError(f"encoder expects {p.n_dims} dims, got {xb.shape[1]}")
    hidden = _activate(xb @ p.W_in.T + p.b_in, p.activation)
    cond_c = hidden @ p.W_head_c.T + p.b_head_c
    if p.W_head_b is not None:
        cond_b = hidden @ p.W_head_b.T + p.b_head_b
    else:
        cond_b = np.zeros((xb.shape[0], 0))
    cache = (xb, hidden, single)
    if single:
        return cond_c[0], cond_b[0], cache
    return cond_c, cond_b, cache


def encoder_backward(p: EncoderParams, cache, d_cond_c, d_cond_b):
    """Exact gradients of an upstream scalar wrt encoder params and input.

    ``d_cond_c``/``d_cond_b`` are the upstream gradients at the two heads,
    shaped like the forward outputs.  Returns (grads dict, d_x_tilde).
    """
    xb, hidden, single = cache
    dc = np.asarray(d_cond_c, dtype=np.float64)
    db = np.asarray(d_cond_b, dtype=np.float64)
    if single:
        dc = dc.reshape(1, -1)
        db = db.reshape(1, -1)
    if dc.shape != (xb.shape[0], p.W_head_c.shape[0]):
        raise ValueError("d_cond_c shape mismatch")
    d_hidden = dc @ p.W_head_c
    grads = {
        "encoder.W_head_c": dc.T @ hidden,
        "encoder.b_head_c": dc.sum(axis=0),
    }
    if p.W_head_b is not None:
        if db.shape != (xb.shape[0], p.W_head_b.shape[0]):
            raise ValueError("d_cond_b shape mismatch")
        d_hidden = d_hidden + db @ p.W_head_b
        grads["encoder.W_head_b"] = db.T @ hidden
        grads["encoder.b_head_b"] = db.sum(axis=0)
    d_pre = d_hidden * _activation_grad_from_output(hidden, p.activation)
    grads["encoder.W_in"] = d_pre.T @ xb
    grads["encoder.b_in"] = d_pre.sum(axis=0)
    d_x = d_pre @ p.W_in
    if single:
        d_x = d_x[0]
    return grads, d_x


@dataclass
class SgdConfig:
    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class GradientAccumulator:
    """Per-tensor gradient buffers, zeroed between optimizer steps."""

    buffers: dict = field(default_factory=dict)

    def add(self, grads: dict):
        for name, g in grads.items():
            if name in self.buffers:
                self.buffers[name] += g
            else:
                self.buffers[name] = np.array(g, dtype=np.float64, copy=True)

    def scale(self, factor: float):
        for g in self.buffers.values():
            g *= factor

    def zero(self):
        for g in self.buffers.values():
            g[...] = 0.0

    def global_norm(self):
        total = 0.0
        for g in self.buffers.values():
            total += float(np.sum(g * g))
        return float(np.sqrt(total))


def sgd_step(tensors: dict, grads: dict, cfg: SgdConfig, velocity: dict):
    """In-place momentum SGD: v <- mu*v - lr*(g + wd*theta); theta <- theta + v.

    ``velocity`` is keyed like ``tensors`` and is created lazily.  Gradients
    are of the loss being minimized.
    """
    for name, theta in tensors.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(theta)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for tensor '{name}'")
        v = velocity.get(name)
        if v is None:
            v = np.zeros_like(theta)
            velocity[name] = v
        v *= cfg.momentum
        v -= cfg.learning_rate * (g + cfg.weight_decay * theta)
        theta += v


_CKPT_MAGIC = b"GSNT\x01"


def save_tensors(path, tensors: dict, meta: dict | None = None):
    """Self-describing binary container: little-endian named float64 tensors.

    Layout per tensor: name length (int64), utf-8 name, rank (int64), dims
    (int64 each), then row-major float64 data.  ``meta`` goes to a ``.json``
    sidecar next to the file.
    """
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<q", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<q", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<q", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.tobytes())
    if meta is not None:
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_tensors(path):
    """Inverse of :func:`save_tensors`; returns (tensors, meta or None)."""
    with open(path, "rb") as fh:
        if fh.read(len(_CKPT_MAGIC)) != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a tensor checkpoint")
        (count,) = struct.unpack("<q", fh.read(8))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<q", fh.read(8))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<q", fh.read(8))
            dims = struct.unpack(f"<{rank}q", fh.read(8 * rank)) if rank else ()
            n_items = int(np.prod(dims)) if dims else 1
            buf = fh.read(8 * n_items)
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(dims).copy()
    meta = None
    try:
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return tensors, meta
