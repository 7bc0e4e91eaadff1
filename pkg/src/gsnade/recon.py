"""Reconstruction distributions for the corrupt-then-reconstruct operator.

Four families, all exposing exact log-probability, exact gradients (wrt own
parameters and wrt the incoming conditional biases), and ancestral sampling:

* factorial Bernoulli  -- per-dim independent Bernoulli(sigmoid(logit));
* factorial Gaussian   -- per-dim independent N(mean, sigma^2);
* NADE                 -- autoregressive product of Bernoulli conditionals
                          computed by a weight-shared recurrence;
* RNADE                -- autoregressive with a k-component Gaussian mixture
                          per dimension.

Conditional biases enter additively: the autoregressive hidden state starts
at ``c0 + cond_c`` and output biases are ``b0 + cond_b``, so a zero
conditional reproduces the unconditional model.  Gradient functions return
gradients of the LOG probability (ascent direction); training code negates.

Batched entry points accept per-row conditional biases, which covers both
minibatch training (one cond per example) and likelihood estimation (one
test point against many conds, via broadcasting).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .net import log_sigmoid, sigmoid
from .validation import is_binary

LOG_SCALE_MIN = -7.0
LOG_SCALE_MAX = 7.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class CondBiases:
    """Encoder-produced conditional biases; ``zero`` gives the unconditional model."""

    c: np.ndarray  # (nade_hidden,) hidden-bias offsets
    b: np.ndarray  # (cond_b_dim,) output-bias offsets

    @classmethod
    def zero(cls, params):
        return cls(c=np.zeros(cond_c_dim(params)), b=np.zeros(cond_b_dim(params)))


@dataclass
class NadeParams:
    W: np.ndarray  # (n_hidden, n_dims); column i enters after observing x_i
    V: np.ndarray  # (n_dims, n_hidden) or (n_dims, extra_hidden)
    b0: np.ndarray  # (n_dims,)
    c0: np.ndarray  # (n_hidden,)
    ordering: np.ndarray = None  # scan order over dimensions
    # optional second stage between the shared hidden state and each output
    U: np.ndarray | None = None  # (extra_hidden, n_hidden)
    u0: np.ndarray | None = None  # (extra_hidden,)

    def __post_init__(self):
        if self.ordering is None:
            self.ordering = np.arange(self.n_dims)
        self.ordering = np.asarray(self.ordering, dtype=np.intp)
        if sorted(self.ordering.tolist()) != list(range(self.n_dims)):
            raise ValueError("ordering must be a permutation of the dimensions")

    @property
    def n_dims(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W.shape[0]

    def tensors(self):
        out = {"nade.W": self.W, "nade.V": self.V, "nade.b0": self.b0, "nade.c0": self.c0}
        if self.U is not None:
            out["nade.U"] = self.U
            out["nade.u0"] = self.u0
        return out


@dataclass
class RnadeParams:
    W: np.ndarray  # (n_hidden, n_dims)
    c0: np.ndarray  # (n_hidden,)
    # per-dimension mixture heads mapping the hidden state to k logits,
    # k means and k log-scales
    alpha_W: np.ndarray  # (n_dims, k, n_hidden)
    alpha_b: np.ndarray  # (n_dims, k)
    mu_W: np.ndarray
    mu_b: np.ndarray
    s_W: np.ndarray
    s_b: np.ndarray
    ordering: np.ndarray = None

    def __post_init__(self):
        if self.ordering is None:
            self.ordering = np.arange(self.n_dims)
        self.ordering = np.asarray(self.ordering, dtype=np.intp)
        if sorted(self.ordering.tolist()) != list(range(self.n_dims)):
            raise ValueError("ordering must be a permutation of the dimensions")
        if self.k < 1:
            raise ValueError("mixture needs k >= 1 components")

    @property
    def n_dims(self):
        return self.W.shape[1]

    @property
    def n_hidden(self):
        return self.W.shape[0]

    @property
    def k(self):
        return self.alpha_b.shape[1]

    def tensors(self):
        return {
            "rnade.W": self.W,
            "rnade.c0": self.c0,
            "rnade.head.alpha_W": self.alpha_W,
            "rnade.head.alpha_b": self.alpha_b,
            "rnade.head.mu_W": self.mu_W,
            "rnade.head.mu_b": self.mu_b,
            "rnade.head.s_W": self.s_W,
            "rnade.head.s_b": self.s_b,
        }


@dataclass
class FactorialBernoulliParams:
    """Per-dim Bernoulli on encoder logits; no parameters of its own."""

    n_dims: int

    def tensors(self):
        return {}


@dataclass
class FactorialGaussianParams:
    b_mu: np.ndarray  # (n_dims,) base mean bias
    log_scale: np.ndarray  # (n_dims,) unconditional per-dim log sigma

    @property
    def n_dims(self):
        return self.b_mu.shape[0]

    def tensors(self):
        return {"factorial.b_mu": self.b_mu, "factorial.log_scale": self.log_scale}


def init_nade(n_dims, n_hidden, seed, extra_hidden=0):
    rng = np.random.default_rng(seed)

    def uni(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    out_in = extra_hidden if extra_hidden else n_hidden
    p = NadeParams(
        W=uni((n_hidden, n_dims), n_dims, n_hidden),
        V=uni((n_dims, out_in), out_in, n_dims),
        b0=np.zeros(n_dims),
        c0=np.zeros(n_hidden),
        U=uni((extra_hidden, n_hidden), n_hidden, extra_hidden) if extra_hidden else None,
        u0=np.zeros(extra_hidden) if extra_hidden else None,
    )
    return p


def init_rnade(n_dims, n_hidden, k, seed):
    rng = np.random.default_rng(seed)

    def uni(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return RnadeParams(
        W=uni((n_hidden, n_dims), n_dims, n_hidden),
        c0=np.zeros(n_hidden),
        alpha_W=uni((n_dims, k, n_hidden), n_hidden, k),
        alpha_b=np.zeros((n_dims, k)),
        mu_W=uni((n_dims, k, n_hidden), n_hidden, k),
        # spread means so mixture components start distinguishable
        mu_b=rng.uniform(-0.5, 0.5, size=(n_dims, k)),
        s_W=uni((n_dims, k, n_hidden), n_hidden, k),
        s_b=np.full((n_dims, k), -1.0),
    )


def init_factorial_gaussian(n_dims):
    return FactorialGaussianParams(b_mu=np.zeros(n_dims), log_scale=np.zeros(n_dims))


# ---------------------------------------------------------------------------
# dispatch helpers

def recon_kind(params):
    if isinstance(params, NadeParams):
        return "nade"
    if isinstance(params, RnadeParams):
        return "rnade"
    if isinstance(params, FactorialBernoulliParams):
        return "factorial_bernoulli"
    if isinstance(params, FactorialGaussianParams):
        return "factorial_gaussian"
    raise TypeError(f"unknown reconstruction parameters: {type(params)!r}")


def data_kind(params):
    return "binary" if recon_kind(params) in ("nade", "factorial_bernoulli") else "continuous"


def cond_c_dim(params):
    """Width of the conditional hidden-bias vector the encoder must produce."""
    if isinstance(params, (NadeParams, RnadeParams)):
        return params.n_hidden
    return 0


def cond_b_dim(params, condition_output_biases=True):
    """Width of the conditional output-bias vector.

    Factorial models are driven entirely through this path, so it cannot be
    disabled for them.
    """
    if isinstance(params, NadeParams):
        return params.n_dims if condition_output_biases else 0
    if isinstance(params, RnadeParams):
        return params.n_dims * 3 * params.k if condition_output_biases else 0
    return params.n_dims


def log_prob(params, cond: CondBiases, x):
    x = np.asarray(x, dtype=np.float64)
    return float(log_prob_batch(params, cond.c, cond.b, x.reshape(1, -1))[0])


def log_prob_and_grads(params, cond: CondBiases, x):
    """Return (log-prob, grads dict).  Gradients wrt the conditional biases
    appear under the keys ``cond.c`` and ``cond.b``."""
    x = np.asarray(x, dtype=np.float64)
    ll, grads, d_cc, d_cb = loss_grads_batch(params, cond.c, cond.b, x.reshape(1, -1))
    grads = dict(grads)
    grads["cond.c"] = d_cc[0]
    grads["cond.b"] = d_cb[0]
    return float(ll[0]), grads


def sample(params, cond: CondBiases, rng):
    return sample_batch(params, cond.c.reshape(1, -1), cond.b.reshape(1, -1), rng)[0]


def log_prob_batch(params, cond_c, cond_b, X):
    kind = recon_kind(params)
    if kind == "nade":
        return nade_log_likelihood_batch(params, cond_c, cond_b, X)
    if kind == "rnade":
        return rnade_log_density_batch(params, cond_c, cond_b, X)
    if kind == "factorial_bernoulli":
        return _fbern_log_prob_batch(params, cond_b, X)
    return _fgauss_log_prob_batch(params, cond_b, X)


def loss_grads_batch(params, cond_c, cond_b, X):
    """(ll per row, param grads summed over rows, d_cond_c, d_cond_b per row)."""
    kind = recon_kind(params)
    if kind == "nade":
        return nade_gradients_batch(params, cond_c, cond_b, X)
    if kind == "rnade":
        return rnade_gradients_batch(params, cond_c, cond_b, X)
    if kind == "factorial_bernoulli":
        return _fbern_gradients_batch(params, cond_b, X)
    return _fgauss_gradients_batch(params, cond_b, X)


def sample_batch(params, cond_c, cond_b, rng):
    kind = recon_kind(params)
    if kind == "nade":
        return nade_sample_batch(params, cond_c, cond_b, rng)
    if kind == "rnade":
        return rnade_sample_batch(params, cond_c, cond_b, rng)
    if kind == "factorial_bernoulli":
        logits = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
        return (rng.random(size=logits.shape) < sigmoid(logits)).astype(np.float64)
    mu, sig, _ = _fgauss_moments(params, cond_b)
    return mu + sig * rng.standard_normal(size=mu.shape)


# ---------------------------------------------------------------------------
# NADE (binary)

def _nade_prepare(params, cond_c, cond_b, X, check_binary=True):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[-1] != params.n_dims:
        raise ValueError(f"expected {params.n_dims}-dim data, got {X.shape[-1]}")
    if check_binary and not is_binary(X):
        raise ValueError("NADE expects binary data")
    cond_c = np.atleast_2d(np.asarray(cond_c, dtype=np.float64))
    cond_b = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    if cond_b.shape[-1] == 0:  # output-bias conditioning disabled
        cond_b = np.zeros((1, params.n_dims))
    B = max(X.shape[0], cond_c.shape[0], cond_b.shape[0])
    return X, cond_c, cond_b, B


def nade_log_likelihood(params: NadeParams, cond: CondBiases, x):
    """Exact log P(x) via the autoregressive recurrence (stable log-sigmoids)."""
    x = np.asarray(x, dtype=np.float64)
    return float(nade_log_likelihood_batch(params, cond.c, cond.b, x.reshape(1, -1))[0])


def nade_log_likelihood_batch(params: NadeParams, cond_c, cond_b, X):
    """Rows of X against rows of cond_*; shapes broadcast on the row axis.

    A single test row against many conditional biases (the CSL shape) takes
    a dedicated path whose temporaries stay (B, n_hidden)-sized.
    """
    X, cond_c, cond_b, B = _nade_prepare(params, cond_c, cond_b, X)
    if params.U is not None:
        return _nade_ll_loop(params, cond_c, cond_b, X, B)
    if X.shape[0] == 1 and B > 1:
        return _nade_ll_one_x_many_conds(params, cond_c, cond_b, X[0], B)
    ll = np.zeros(B)
    for start in range(0, B, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, B)
        ll[start:stop] = _nade_ll_vectorized(
            params,
            np.broadcast_to(cond_c, (B, params.n_hidden))[start:stop],
            np.broadcast_to(cond_b, (B, params.n_dims))[start:stop],
            np.broadcast_to(X, (B, params.n_dims))[start:stop])
    return ll


_ROW_CHUNK = 16  # bounds (rows, n_dims, n_hidden) temporaries; cache-friendly


def _nade_scan_tensors(params):
    """Parameter views in scan order: Wo (H, d), Vo (d, H), b0o (d,)."""
    o = params.ordering
    return params.W[:, o], params.V[o], params.b0[o]


def _nade_ll_vectorized(params, cond_c, cond_b, X):
    """Whole-batch forward with the per-dim recurrence unrolled as a cumsum
    over scan positions; one (B, d, H) temporary."""
    o = params.ordering
    Wo, Vo, b0o = _nade_scan_tensors(params)
    Xo = X[:, o]
    M = Xo[:, :, None] * Wo.T[None, :, :]
    A = np.empty_like(M)
    A[:, 0, :] = 0.0
    np.cumsum(M[:, :-1, :], axis=1, out=A[:, 1:, :])
    A += (params.c0 + cond_c)[:, None, :]
    Hs = sigmoid(A, out=A)
    logits = np.einsum("bth,th->bt", Hs, Vo) + b0o + cond_b[:, o]
    sign = 2.0 * Xo - 1.0
    return -np.logaddexp(0.0, -sign * logits).sum(axis=1)


def _nade_ll_one_x_many_conds(params, cond_c, cond_b, x, B):
    """One test vector against B conditional-bias rows; the x-dependent
    prefix of the hidden activation is shared across rows."""
    Wo, Vo, b0o = _nade_scan_tensors(params)
    xo = x[params.ordering]
    prefix = np.zeros_like(params.c0)
    base = params.c0 + np.broadcast_to(cond_c, (B, params.n_hidden))
    cb = np.broadcast_to(cond_b, (B, params.n_dims))[:, params.ordering]
    ll = np.zeros(B)
    buf = np.empty((B, params.n_hidden))
    for t in range(params.n_dims):
        np.add(base, prefix, out=buf)
        h = sigmoid(buf, out=buf)
        logit = h @ Vo[t]
        logit += b0o[t] + cb[:, t]
        sign = 2.0 * xo[t] - 1.0
        ll -= np.logaddexp(0.0, -sign * logit)
        if xo[t] != 0.0:
            prefix = prefix + Wo[:, t] * xo[t]
    return ll


def _nade_ll_loop(params, cond_c, cond_b, X, B):
    """Reference per-dim recurrence; also serves the deep output head."""
    a = np.broadcast_to(params.c0 + cond_c, (B, params.n_hidden)).copy()
    ll = np.zeros(B)
    deep = params.U is not None
    for i in params.ordering:
        h = sigmoid(a)
        if deep:
            h = sigmoid(h @ params.U.T + params.u0)
        logit = h @ params.V[i] + params.b0[i] + cond_b[:, i]
        xi = X[:, i]
        ll += np.where(xi == 1.0, log_sigmoid(logit), log_sigmoid(-logit))
        a += np.multiply.outer(xi, params.W[:, i])
    return ll


def nade_gradients(params: NadeParams, cond: CondBiases, x):
    """(log-likelihood, exact gradients of it) for a single vector."""
    x = np.asarray(x, dtype=np.float64)
    ll, grads, d_cc, d_cb = nade_gradients_batch(params, cond.c, cond.b, x.reshape(1, -1))
    grads = dict(grads)
    grads["cond.c"] = d_cc[0]
    grads["cond.b"] = d_cb[0]
    return float(ll[0]), grads


def nade_gradients_batch(params: NadeParams, cond_c, cond_b, X):
    """Cost O(B * n_dims * n_hidden); cond gradients are per row, parameter
    gradients are summed over rows."""
    X, cond_c, cond_b, B = _nade_prepare(params, cond_c, cond_b, X)
    if params.U is not None:
        return _nade_grads_loop(params, cond_c, cond_b, X, B)
    d, H = params.n_dims, params.n_hidden
    ll = np.zeros(B)
    d_cond_c = np.empty((B, H))
    d_cond_b = np.empty((B, d))
    acc = None
    Xb = np.broadcast_to(X, (B, d))
    ccb = np.broadcast_to(cond_c, (B, H))
    cbb = np.broadcast_to(cond_b, (B, d))
    for start in range(0, B, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, B)
        out = _nade_grads_vectorized(params, ccb[start:stop], cbb[start:stop],
                                     Xb[start:stop])
        ll[start:stop], grads_chunk, d_cond_c[start:stop], d_cond_b[start:stop] = out
        if acc is None:
            acc = grads_chunk
        else:
            for name, g in grads_chunk.items():
                acc[name] += g
    return ll, acc, d_cond_c, d_cond_b


def _nade_grads_vectorized(params, cond_c, cond_b, X):
    o = params.ordering
    Wo, Vo, b0o = _nade_scan_tensors(params)
    Xo = np.ascontiguousarray(X[:, o])
    M = Xo[:, :, None] * Wo.T[None, :, :]
    Hs = np.empty_like(M)
    Hs[:, 0, :] = 0.0
    np.cumsum(M[:, :-1, :], axis=1, out=Hs[:, 1:, :])
    Hs += (params.c0 + cond_c)[:, None, :]
    Hs = sigmoid(Hs, out=Hs)
    logits = np.einsum("bth,th->bt", Hs, Vo) + b0o + cond_b[:, o]
    sign = 2.0 * Xo - 1.0
    ll = -np.logaddexp(0.0, -sign * logits).sum(axis=1)

    dlogit = Xo - sigmoid(logits)
    dVo = np.einsum("bt,bth->th", dlogit, Hs)
    # dA = dlogit * V * sigma'(a), reusing the M buffer
    dA = np.multiply(dlogit[:, :, None], Vo[None, :, :], out=M)
    dA *= Hs
    Hs -= 1.0
    dA *= Hs  # now -(dlogit V) h (1-h); fix the sign on the consumers
    # suffix[t] = sum_{u >= t} dA[u], via an in-place reverse cumsum;
    # gradient wrt W column t needs u > t
    rev = dA[:, ::-1, :]
    np.cumsum(rev, axis=1, out=rev)
    suffix = dA
    d_cond_c = -suffix[:, 0, :].copy()
    d = params.n_dims
    dW = np.zeros_like(params.W)
    if d > 1:
        dW[:, o[:-1]] = -np.einsum("bt,bth->ht", Xo[:, :-1], suffix[:, 1:, :])
    dV = np.empty_like(params.V)
    dV[o] = dVo
    db0 = np.zeros(d)
    db0[o] = dlogit.sum(axis=0)
    d_cond_b = np.empty_like(dlogit)
    d_cond_b[:, o] = dlogit
    grads = {"nade.W": dW, "nade.V": dV, "nade.b0": db0,
             "nade.c0": d_cond_c.sum(axis=0)}
    return ll, grads, d_cond_c, d_cond_b


def _nade_grads_loop(params, cond_c, cond_b, X, B):
    """Reference per-dim backward; also serves the deep output head."""
    d = params.n_dims
    H = params.n_hidden
    deep = params.U is not None
    a = np.broadcast_to(params.c0 + cond_c, (B, H)).copy()
    h_cache = np.empty((d, B, H))
    g_cache = np.empty((d, B, params.U.shape[0])) if deep else None
    logit_cache = np.empty((d, B))
    ll = np.zeros(B)
    for pos, i in enumerate(params.ordering):
        h = sigmoid(a)
        h_cache[pos] = h
        top = h
        if deep:
            top = sigmoid(h @ params.U.T + params.u0)
            g_cache[pos] = top
        logit = top @ params.V[i] + params.b0[i] + cond_b[:, i]
        logit_cache[pos] = logit
        xi = X[:, i]
        ll += np.where(xi == 1.0, log_sigmoid(logit), log_sigmoid(-logit))
        a += np.multiply.outer(xi, params.W[:, i])

    dW = np.zeros_like(params.W)
    dV = np.zeros_like(params.V)
    db0 = np.zeros(d)
    dU = np.zeros_like(params.U) if deep else None
    du0 = np.zeros_like(params.u0) if deep else None
    d_cond_b = np.zeros((B, d))
    dA = np.zeros((B, H))  # gradient wrt the running activation a
    Xb = np.broadcast_to(X, (B, d))
    for pos in range(d - 1, -1, -1):
        i = params.ordering[pos]
        xi = Xb[:, i]
        # a_{pos+1} = a_pos + W[:, i] * x_i, so dA flows into W before this dim
        dW[:, i] = xi @ dA
        dlogit = xi - sigmoid(logit_cache[pos])
        db0[i] = dlogit.sum()
        d_cond_b[:, i] = dlogit
        h = h_cache[pos]
        if deep:
            g = g_cache[pos]
            dV[i] = dlogit @ g
            dg = np.multiply.outer(dlogit, params.V[i]) * g * (1.0 - g)
            dU += dg.T @ h
            du0 += dg.sum(axis=0)
            dh = dg @ params.U
        else:
            dV[i] = dlogit @ h
            dh = np.multiply.outer(dlogit, params.V[i])
        dA += dh * h * (1.0 - h)
    grads = {"nade.W": dW, "nade.V": dV, "nade.b0": db0, "nade.c0": dA.sum(axis=0)}
    if deep:
        grads["nade.U"] = dU
        grads["nade.u0"] = du0
    return ll, grads, dA, d_cond_b


def nade_sample(params: NadeParams, cond: CondBiases, rng):
    """Ancestral sample; cost O(n_dims * n_hidden)."""
    return nade_sample_batch(params, cond.c.reshape(1, -1), cond.b.reshape(1, -1), rng)[0]


def nade_sample_batch(params: NadeParams, cond_c, cond_b, rng):
    cond_c = np.atleast_2d(np.asarray(cond_c, dtype=np.float64))
    cond_b = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    if cond_b.shape[-1] == 0:
        cond_b = np.zeros((1, params.n_dims))
    B = max(cond_c.shape[0], cond_b.shape[0])
    if B == 1 and params.U is None:
        return _nade_sample_single(params, cond_c[0], cond_b[0], rng).reshape(1, -1)
    a = np.broadcast_to(params.c0 + cond_c, (B, params.n_hidden)).copy()
    X = np.empty((B, params.n_dims))
    deep = params.U is not None
    for i in params.ordering:
        h = sigmoid(a)
        if deep:
            h = sigmoid(h @ params.U.T + params.u0)
        logit = h @ params.V[i] + params.b0[i] + cond_b[:, i]
        xi = (rng.random(size=B) < sigmoid(logit)).astype(np.float64)
        X[:, i] = xi
        a += np.multiply.outer(xi, params.W[:, i])
    return X


def _nade_sample_single(params, cond_c, cond_b, rng):
    """One ancestral draw; the recurrence update is skipped for zero bits and
    the per-dim rng consumption matches the batched path (one uniform each)."""
    a = params.c0 + cond_c
    x = np.empty(params.n_dims)
    buf = np.empty_like(a)
    W, V, b0 = params.W, params.V, params.b0
    for i in params.ordering:
        h = sigmoid(a, out=buf)
        logit = h @ V[i] + b0[i] + cond_b[i]
        xi = 1.0 if rng.random() < sigmoid(logit) else 0.0
        x[i] = xi
        if xi != 0.0:
            a = a + W[:, i]
    return x


# ---------------------------------------------------------------------------
# RNADE (continuous, k-component Gaussian mixture per dimension)

def _rnade_prepare(params, cond_c, cond_b, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    d, k = params.n_dims, params.k
    if X.shape[-1] != d:
        raise ValueError(f"expected {d}-dim data, got {X.shape[-1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("RNADE input must be finite")
    cond_c = np.atleast_2d(np.asarray(cond_c, dtype=np.float64))
    cond_b = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    if cond_b.shape[-1] == 0:
        cond_b = np.zeros((1, d, 3 * k))
    else:
        cond_b = cond_b.reshape(cond_b.shape[0], d, 3 * k)
    B = max(X.shape[0], cond_c.shape[0], cond_b.shape[0])
    return X, cond_c, cond_b, B


def _rnade_dim_heads(params, i, h, cond_b):
    """Mixture parameters for dimension i given hidden state h (B, H)."""
    k = params.k
    za = h @ params.alpha_W[i].T + params.alpha_b[i] + cond_b[:, i, :k]
    zm = h @ params.mu_W[i].T + params.mu_b[i] + cond_b[:, i, k:2 * k]
    zs = h @ params.s_W[i].T + params.s_b[i] + cond_b[:, i, 2 * k:]
    s = np.clip(zs, LOG_SCALE_MIN, LOG_SCALE_MAX)
    return za, zm, zs, s


def rnade_log_density(params: RnadeParams, cond: CondBiases, x):
    x = np.asarray(x, dtype=np.float64)
    return float(rnade_log_density_batch(params, cond.c, cond.b, x.reshape(1, -1))[0])


def rnade_log_density_batch(params: RnadeParams, cond_c, cond_b, X):
    X, cond_c, cond_b, B = _rnade_prepare(params, cond_c, cond_b, X)
    a = np.broadcast_to(params.c0 + cond_c, (B, params.n_hidden)).copy()
    ld = np.zeros(B)
    for i in params.ordering:
        h = sigmoid(a)
        za, zm, _, s = _rnade_dim_heads(params, i, h, cond_b)
        xi = X[:, i]
        log_w = za - logsumexp(za, axis=1, keepdims=True)
        z = (xi[:, None] - zm) * np.exp(-s)
        log_comp = -0.5 * z * z - s - _HALF_LOG_2PI
        ld += logsumexp(log_w + log_comp, axis=1)
        a += np.multiply.outer(xi, params.W[:, i])
    return ld


def rnade_gradients(params: RnadeParams, cond: CondBiases, x):
    x = np.asarray(x, dtype=np.float64)
    ld, grads, d_cc, d_cb = rnade_gradients_batch(params, cond.c, cond.b, x.reshape(1, -1))
    grads = dict(grads)
    grads["cond.c"] = d_cc[0]
    grads["cond.b"] = d_cb[0].reshape(-1)
    return float(ld[0]), grads


def rnade_gradients_batch(params: RnadeParams, cond_c, cond_b, X):
    """Responsibility-weighted mixture gradients, exact through the clamp on
    the log-scales (clamped components get zero scale gradient)."""
    X, cond_c, cond_b, B = _rnade_prepare(params, cond_c, cond_b, X)
    d, k, H = params.n_dims, params.k, params.n_hidden
    a = np.broadcast_to(params.c0 + cond_c, (B, H)).copy()
    h_cache = np.empty((d, B, H))
    za_cache = np.empty((d, B, k))
    zm_cache = np.empty((d, B, k))
    zs_cache = np.empty((d, B, k))
    ld = np.zeros(B)
    for pos, i in enumerate(params.ordering):
        h = sigmoid(a)
        h_cache[pos] = h
        za, zm, zs, s = _rnade_dim_heads(params, i, h, cond_b)
        za_cache[pos], zm_cache[pos], zs_cache[pos] = za, zm, zs
        xi = X[:, i]
        log_w = za - logsumexp(za, axis=1, keepdims=True)
        z = (xi[:, None] - zm) * np.exp(-s)
        log_comp = -0.5 * z * z - s - _HALF_LOG_2PI
        ld += logsumexp(log_w + log_comp, axis=1)
        a += np.multiply.outer(xi, params.W[:, i])

    grads = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    d_cond_b = np.zeros((B, d, 3 * k))
    dA = np.zeros((B, H))
    Xb = np.broadcast_to(X, (B, d))
    for pos in range(d - 1, -1, -1):
        i = params.ordering[pos]
        xi = Xb[:, i]
        grads["rnade.W"][:, i] = xi @ dA
        h = h_cache[pos]
        za, zm, zs = za_cache[pos], zm_cache[pos], zs_cache[pos]
        s = np.clip(zs, LOG_SCALE_MIN, LOG_SCALE_MAX)
        inv_sig = np.exp(-s)
        log_w = za - logsumexp(za, axis=1, keepdims=True)
        z = (xi[:, None] - zm) * inv_sig
        log_comp = -0.5 * z * z - s - _HALF_LOG_2PI
        joint = log_w + log_comp
        gamma = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        dza = gamma - np.exp(log_w)
        dzm = gamma * z * inv_sig
        clamp_open = (zs > LOG_SCALE_MIN) & (zs < LOG_SCALE_MAX)
        dzs = gamma * (z * z - 1.0) * clamp_open
        grads["rnade.head.alpha_W"][i] = dza.T @ h
        grads["rnade.head.mu_W"][i] = dzm.T @ h
        grads["rnade.head.s_W"][i] = dzs.T @ h
        grads["rnade.head.alpha_b"][i] = dza.sum(axis=0)
        grads["rnade.head.mu_b"][i] = dzm.sum(axis=0)
        grads["rnade.head.s_b"][i] = dzs.sum(axis=0)
        d_cond_b[:, i, :k] = dza
        d_cond_b[:, i, k:2 * k] = dzm
        d_cond_b[:, i, 2 * k:] = dzs
        dh = dza @ params.alpha_W[i] + dzm @ params.mu_W[i] + dzs @ params.s_W[i]
        dA += dh * h * (1.0 - h)
    grads["rnade.c0"] = dA.sum(axis=0)
    return ld, grads, dA, d_cond_b.reshape(B, d * 3 * k)


def rnade_sample(params: RnadeParams, cond: CondBiases, rng):
    return rnade_sample_batch(params, cond.c.reshape(1, -1), cond.b.reshape(1, -1), rng)[0]


def rnade_sample_batch(params: RnadeParams, cond_c, cond_b, rng):
    cond_c = np.atleast_2d(np.asarray(cond_c, dtype=np.float64))
    cond_b = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    d, k = params.n_dims, params.k
    if cond_b.shape[-1] == 0:
        cond_b = np.zeros((1, d, 3 * k))
    else:
        cond_b = cond_b.reshape(cond_b.shape[0], d, 3 * k)
    B = max(cond_c.shape[0], cond_b.shape[0])
    a = np.broadcast_to(params.c0 + cond_c, (B, params.n_hidden)).copy()
    X = np.empty((B, d))
    for i in params.ordering:
        h = sigmoid(a)
        za, zm, _, s = _rnade_dim_heads(params, i, h, cond_b)
        w = np.exp(za - logsumexp(za, axis=1, keepdims=True))
        # inverse-CDF draw of the mixture component per row
        u = rng.random(size=B)
        comp = np.minimum((np.cumsum(w, axis=1) < u[:, None]).sum(axis=1), k - 1)
        rows = np.arange(B)
        xi = zm[rows, comp] + np.exp(s[rows, comp]) * rng.standard_normal(size=B)
        X[:, i] = xi
        a += np.multiply.outer(xi, params.W[:, i])
    return X


# ---------------------------------------------------------------------------
# factorial baselines

def factorial_log_prob(params, cond: CondBiases, x):
    """Independent per-dim log-probability (Bernoulli or Gaussian)."""
    return log_prob(params, cond, x)


def factorial_gradients(params, cond: CondBiases, x):
    return log_prob_and_grads(params, cond, x)


def factorial_sample(params, cond: CondBiases, rng):
    return sample(params, cond, rng)


def _fbern_log_prob_batch(params, cond_b, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not is_binary(X):
        raise ValueError("factorial Bernoulli expects binary data")
    logits = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    terms = np.where(X == 1.0, log_sigmoid(logits), log_sigmoid(-logits))
    return terms.sum(axis=1) + np.zeros(max(X.shape[0], logits.shape[0]))


def _fbern_gradients_batch(params, cond_b, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not is_binary(X):
        raise ValueError("factorial Bernoulli expects binary data")
    logits = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    ll = _fbern_log_prob_batch(params, cond_b, X)
    B = ll.shape[0]
    d_cond_b = np.broadcast_to(X - sigmoid(logits), (B, params.n_dims)).copy()
    return ll, {}, np.zeros((B, 0)), d_cond_b


def _fgauss_moments(params, cond_b):
    cond_b = np.atleast_2d(np.asarray(cond_b, dtype=np.float64))
    mu = cond_b + params.b_mu
    s = np.clip(params.log_scale, LOG_SCALE_MIN, LOG_SCALE_MAX)
    return mu, np.exp(s), s


def _fgauss_log_prob_batch(params, cond_b, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mu, sig, s = _fgauss_moments(params, cond_b)
    z = (X - mu) / sig
    return (-0.5 * z * z - s - _HALF_LOG_2PI).sum(axis=1)


def _fgauss_gradients_batch(params, cond_b, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mu, sig, s = _fgauss_moments(params, cond_b)
    ll = _fgauss_log_prob_batch(params, cond_b, X)
    B = ll.shape[0]
    z = (X - mu) / sig
    d_mu = np.broadcast_to(z / sig, (B, params.n_dims)).copy()
    clamp_open = (params.log_scale > LOG_SCALE_MIN) & (params.log_scale < LOG_SCALE_MAX)
    d_s = (np.broadcast_to(z * z - 1.0, (B, params.n_dims)) * clamp_open).sum(axis=0)
    grads = {"factorial.b_mu": d_mu.sum(axis=0), "factorial.log_scale": d_s}
    return ll, grads, np.zeros((B, 0)), d_mu
