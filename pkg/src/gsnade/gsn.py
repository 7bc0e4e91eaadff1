"""The GSN Markov chain: corrupt, encode, reconstruct; training; sampling.

A :class:`GsnModel` bundles the encoder, a reconstruction distribution and a
corruption spec.  One chain step is

    x_tilde ~ C(. | x_t)                      (parameter-less corruption)
    x_{t+1} ~ P_recon(. | encoder(x_tilde))

Training maximizes log P_recon(x | encoder(corrupt(x))) over the data, either
plainly (one corruption per example) or with walkback rounds that re-corrupt
the model's own samples while always reconstructing the original example.
"""

import copy
import time
from dataclasses import dataclass

import numpy as np

from . import recon as R
from .corruption import DYNAMIC, SALT_PEPPER, CorruptionSpec, corrupt
from .data import BINARY, Dataset, MinibatchPlan, next_minibatch
from .net import (DivergenceError, EncoderParams, GradientAccumulator,
                  SgdConfig, encoder_backward, encoder_forward, init_encoder,
                  load_tensors, save_tensors, sgd_step)
from .evaluation import TransitionMatrix

PLAIN = "plain"
WALKBACK = "walkback"


@dataclass
class GsnModel:
    encoder: EncoderParams
    recon: object  # NadeParams | RnadeParams | Factorial*Params
    corruption: CorruptionSpec
    condition_output_biases: bool = True

    @property
    def n_dims(self):
        return self.encoder.n_dims

    @property
    def data_kind(self):
        return R.data_kind(self.recon)

    def tensors(self):
        out = dict(self.encoder.tensors())
        out.update(self.recon.tensors())
        return out

    def validate(self):
        expected_cb = R.cond_b_dim(self.recon, self.condition_output_biases)
        if self.encoder.cond_b_dim != expected_cb:
            raise ValueError("encoder output-bias head width does not match reconstruction")
        if self.encoder.W_head_c.shape[0] != R.cond_c_dim(self.recon):
            raise ValueError("encoder hidden-bias head width does not match reconstruction")
        if self.corruption.kind == SALT_PEPPER and self.data_kind != BINARY:
            raise ValueError("salt-and-pepper corruption requires binary data")


@dataclass
class ChainState:
    x: np.ndarray  # current visible sample x_t
    h: np.ndarray | None  # latent: the corrupted x_tilde that produced x_t
    step: int


@dataclass
class TrainReport:
    epoch: int
    nll_nats: float
    grad_norm: float
    seconds: float


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    sgd: SgdConfig
    mode: str = PLAIN
    walkback_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (PLAIN, WALKBACK):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.walkback_k < 0:
            raise ValueError("walkback_k must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def build_model(recon_kind, n_dims, *, encoder_hidden=200, nade_hidden=200, k=5,
                extra_hidden=0, activation="tanh", condition_output_biases=True,
                corruption=None, seed=0):
    """Construct an initialized model; encoder head widths are derived from
    the reconstruction choice."""
    ss = np.random.SeedSequence(seed)
    enc_seed, rec_seed = ss.spawn(2)
    if recon_kind == "nade":
        rec = R.init_nade(n_dims, nade_hidden, rec_seed, extra_hidden=extra_hidden)
    elif recon_kind == "rnade":
        rec = R.init_rnade(n_dims, nade_hidden, k, rec_seed)
    elif recon_kind == "factorial_bernoulli":
        rec = R.FactorialBernoulliParams(n_dims)
    elif recon_kind == "factorial_gaussian":
        rec = R.init_factorial_gaussian(n_dims)
    else:
        raise ValueError(f"unknown reconstruction kind {recon_kind!r}")
    if corruption is None:
        corruption = (CorruptionSpec(SALT_PEPPER, level=0.25)
                      if R.data_kind(rec) == BINARY
                      else CorruptionSpec("gaussian", sigma=0.3))
    enc = init_encoder(
        n_dims, encoder_hidden,
        cond_c_dim=R.cond_c_dim(rec),
        cond_b_dim=R.cond_b_dim(rec, condition_output_biases),
        seed=enc_seed, activation=activation,
    )
    model = GsnModel(enc, rec, corruption, condition_output_biases)
    model.validate()
    return model


def _recon_cond_views(model, cond_c, cond_b):
    """Encoder output -> (cond_c, cond_b) as the reconstruction expects."""
    if model.encoder.W_head_b is None:
        cond_b = np.zeros((np.atleast_2d(cond_c).shape[0], 0))
    return cond_c, cond_b


def loss_and_grads_given_corrupted(model: GsnModel, X, X_tilde):
    """Joint NLL and gradients with the corruption fixed (used by training
    and by the finite-difference oracle, which must hold x_tilde constant).

    Returns (per-example losses, gradient dict of the SUMMED loss).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    X_tilde = np.atleast_2d(np.asarray(X_tilde, dtype=np.float64))
    cond_c, cond_b, cache = encoder_forward(model.encoder, X_tilde)
    cond_c, cond_b = _recon_cond_views(model, cond_c, cond_b)
    ll, recon_grads, d_cc, d_cb = R.loss_grads_batch(model.recon, cond_c, cond_b, X)
    grads = {name: -g for name, g in recon_grads.items()}
    if model.encoder.W_head_b is None:
        d_cb = np.zeros((d_cc.shape[0], 0))
    enc_grads, _ = encoder_backward(model.encoder, cache, -d_cc, -d_cb)
    grads.update(enc_grads)
    return -ll, grads


def denoise_loss_and_grads(model: GsnModel, x, rng):
    """Single-example denoising objective: corrupt, encode, score the clean x.

    Gradients flow through the reconstruction into the encoder but not into
    the corruption (which has no parameters).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    X_tilde = corrupt(model.corruption, X, rng)
    losses, grads = loss_and_grads_given_corrupted(model, X, X_tilde)
    return (float(losses[0]) if single else losses), grads


def walkback_loss_and_grads(model: GsnModel, x, K, rng):
    """Walkback objective: K extra corruption rounds on the model's own
    samples, every round scoring the ORIGINAL clean x.  Sampled states carry
    no gradient.  K=0 is exactly the plain denoising objective.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    total_losses = np.zeros(X.shape[0])
    acc = GradientAccumulator()
    X_tilde = corrupt(model.corruption, X, rng)
    for round_idx in range(K + 1):
        losses, grads = loss_and_grads_given_corrupted(model, X, X_tilde)
        total_losses += losses
        acc.add(grads)
        if round_idx < K:
            cond_c, cond_b, _ = encoder_forward(model.encoder, X_tilde)
            cond_c, cond_b = _recon_cond_views(model, cond_c, cond_b)
            X_prime = R.sample_batch(model.recon, cond_c, cond_b, rng)
            X_tilde = corrupt(model.corruption, X_prime, rng)
    return (float(total_losses[0]) if single else total_losses), acc.buffers


def train(model: GsnModel, dataset: Dataset, cfg: TrainConfig, on_epoch_end=None):
    """Minibatch SGD over the denoising (or walkback) objective.

    Returns (trained model, list of per-epoch TrainReport).  The input model
    is not mutated.  On numerical divergence raises DivergenceError carrying
    the last end-of-epoch model and the reports so far.  ``on_epoch_end``,
    when given, is called with (model, report) after each epoch; callers that
    want a snapshot must copy the model themselves.
    """
    model.validate()
    if dataset.kind != model.data_kind:
        raise ValueError(
            f"dataset kind {dataset.kind!r} does not match model data kind {model.data_kind!r}")
    model = copy.deepcopy(model)
    reports = []
    if cfg.epochs == 0:
        return model, reports
    noise_rng = np.random.default_rng([cfg.seed, 982_451_653])
    plan = MinibatchPlan(batch_size=cfg.batch_size, seed=cfg.seed)
    velocity = {}
    tensors = model.tensors()
    last_good = copy.deepcopy(model)
    n = dataset.n_examples
    batches_per_epoch = int(np.ceil(n / cfg.batch_size))
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        epoch_loss = 0.0
        norms = []
        for _ in range(batches_per_epoch):
            X, plan = next_minibatch(dataset, plan)
            if cfg.mode == WALKBACK:
                losses, grads = walkback_loss_and_grads(model, X, cfg.walkback_k, noise_rng)
            else:
                losses, grads = denoise_loss_and_grads(model, X, noise_rng)
            batch_loss = float(np.sum(losses))
            if not np.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}", model=last_good, reports=reports)
            epoch_loss += batch_loss
            scale = 1.0 / losses.shape[0]
            mean_grads = {name: g * scale for name, g in grads.items()}
            norms.append(_global_norm(mean_grads))
            try:
                sgd_step(tensors, mean_grads, cfg.sgd, velocity)
            except DivergenceError as err:
                raise DivergenceError(str(err), model=last_good, reports=reports) from err
        nll = epoch_loss / n
        if not np.isfinite(nll):
            raise DivergenceError(
                f"non-finite epoch NLL at epoch {epoch}", model=last_good, reports=reports)
        reports.append(TrainReport(
            epoch=epoch, nll_nats=nll,
            grad_norm=float(np.mean(norms)),
            seconds=time.perf_counter() - t0,
        ))
        last_good = copy.deepcopy(model)
        if on_epoch_end is not None:
            on_epoch_end(model, reports[-1])
    return model, reports


def _global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def run_chain(model: GsnModel, x0, n_steps, rng, record_every=1):
    """Iterate the chain, recording every ``record_every``-th state (step 0,
    the initial state, is always recorded and has no latent)."""
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (model.n_dims,):
        raise ValueError(f"x0 must have shape ({model.n_dims},)")
    states = [ChainState(x=x.copy(), h=None, step=0)]
    for step in range(1, n_steps + 1):
        x_tilde = corrupt(model.corruption, x, rng)
        cond_c, cond_b, _ = encoder_forward(model.encoder, x_tilde.reshape(1, -1))
        cond_c, cond_b = _recon_cond_views(model, cond_c, cond_b)
        x = R.sample_batch(model.recon, cond_c, cond_b, rng)[0]
        if step % record_every == 0:
            states.append(ChainState(x=x.copy(), h=x_tilde.copy(), step=step))
    return states


def collect_latents(model: GsnModel, x0, n_latents, stride, rng, burn_in=0):
    """Collect corrupted-state latents h from one chain, every ``stride``
    steps after ``burn_in`` (counting from step 1, no burn-in by default)."""
    if n_latents < 1:
        raise ValueError("n_latents must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x = np.asarray(x0, dtype=np.float64).copy()
    latents = np.empty((n_latents, model.n_dims))
    collected = 0
    step = 0
    while collected < n_latents:
        step += 1
        x_tilde = corrupt(model.corruption, x, rng)
        cond_c, cond_b, _ = encoder_forward(model.encoder, x_tilde.reshape(1, -1))
        cond_c, cond_b = _recon_cond_views(model, cond_c, cond_b)
        x = R.sample_batch(model.recon, cond_c, cond_b, rng)[0]
        if step > burn_in and (step - burn_in) % stride == 0:
            latents[collected] = x_tilde
            collected += 1
    return latents


def binary_states(d):
    """All binary vectors of length d; row index n has bit j of n at x[j]."""
    n = np.arange(2 ** d)
    return ((n[:, None] >> np.arange(d)[None, :]) & 1).astype(np.float64)


def exact_transition_matrix(model: GsnModel, max_dims=12) -> TransitionMatrix:
    """Row-stochastic transition matrix over the enumerated binary space:

        T[x, x'] = sum_xt C(xt | x) * P_recon(x' | encoder(xt))

    computed by full enumeration (cost 2^(2d)); requires binary data and
    salt-and-pepper corruption at a fixed level.
    """
    model.validate()
    if model.data_kind != BINARY:
        raise ValueError("exact transition matrix requires binary data")
    if model.corruption.kind != SALT_PEPPER or model.corruption.level == DYNAMIC:
        raise ValueError("exact transition matrix requires a fixed salt-and-pepper level")
    d = model.n_dims
    if d > max_dims:
        raise ValueError(f"state space too large: {d} dims > {max_dims}")
    level = float(model.corruption.level)
    states = binary_states(d)
    # Hamming distances via inner products with the complements
    ham = states @ (1.0 - states).T + (1.0 - states) @ states.T
    half = level / 2.0
    with np.errstate(divide="ignore"):
        log_c = ham * np.log(half) if half > 0 else np.where(ham > 0, -np.inf, 0.0)
    C = np.exp(log_c + (d - ham) * np.log1p(-half))
    cond_c, cond_b, _ = encoder_forward(model.encoder, states)
    cond_c, cond_b = _recon_cond_views(model, cond_c, cond_b)
    n_states = states.shape[0]
    Rmat = np.empty((n_states, n_states))
    for j in range(n_states):
        lp = R.log_prob_batch(model.recon, cond_c[j:j + 1], cond_b[j:j + 1], states)
        Rmat[j] = np.exp(lp)
    return TransitionMatrix(entries=C @ Rmat, d=d)


# ---------------------------------------------------------------------------
# checkpointing

def save_model(model: GsnModel, path, extra_meta=None):
    meta = {
        "format": "gsn-checkpoint-v1",
        "recon": R.recon_kind(model.recon),
        "n_dims": model.n_dims,
        "encoder_hidden": model.encoder.W_in.shape[0],
        "activation": model.encoder.activation,
        "condition_output_biases": model.condition_output_biases,
        "corruption": {
            "kind": model.corruption.kind,
            "sigma": model.corruption.sigma,
            "level": model.corruption.level,
        },
    }
    if isinstance(model.recon, R.NadeParams):
        meta["nade_hidden"] = model.recon.n_hidden
        meta["extra_hidden"] = 0 if model.recon.U is None else model.recon.U.shape[0]
        meta["ordering"] = model.recon.ordering.tolist()
    elif isinstance(model.recon, R.RnadeParams):
        meta["nade_hidden"] = model.recon.n_hidden
        meta["k"] = model.recon.k
        meta["ordering"] = model.recon.ordering.tolist()
    if extra_meta:
        meta.update(extra_meta)
    save_tensors(path, model.tensors(), meta)


def load_model(path) -> GsnModel:
    tensors, meta = load_tensors(path)
    if meta is None or meta.get("format") != "gsn-checkpoint-v1":
        raise ValueError(f"{path}: missing or unrecognized checkpoint sidecar")
    corr = meta["corruption"]
    corruption = CorruptionSpec(kind=corr["kind"], sigma=corr["sigma"], level=corr["level"])
    kind = meta["recon"]
    if kind == "nade":
        rec = R.NadeParams(
            W=tensors["nade.W"], V=tensors["nade.V"],
            b0=tensors["nade.b0"], c0=tensors["nade.c0"],
            ordering=np.array(meta["ordering"], dtype=np.intp),
            U=tensors.get("nade.U"), u0=tensors.get("nade.u0"),
        )
    elif kind == "rnade":
        rec = R.RnadeParams(
            W=tensors["rnade.W"], c0=tensors["rnade.c0"],
            alpha_W=tensors["rnade.head.alpha_W"], alpha_b=tensors["rnade.head.alpha_b"],
            mu_W=tensors["rnade.head.mu_W"], mu_b=tensors["rnade.head.mu_b"],
            s_W=tensors["rnade.head.s_W"], s_b=tensors["rnade.head.s_b"],
            ordering=np.array(meta["ordering"], dtype=np.intp),
        )
    elif kind == "factorial_bernoulli":
        rec = R.FactorialBernoulliParams(n_dims=meta["n_dims"])
    elif kind == "factorial_gaussian":
        rec = R.FactorialGaussianParams(
            b_mu=tensors["factorial.b_mu"], log_scale=tensors["factorial.log_scale"])
    else:
        raise ValueError(f"{path}: unknown reconstruction kind {kind!r}")
    enc = EncoderParams(
        W_in=tensors["encoder.W_in"], b_in=tensors["encoder.b_in"],
        W_head_c=tensors["encoder.W_head_c"], b_head_c=tensors["encoder.b_head_c"],
        W_head_b=tensors.get("encoder.W_head_b"), b_head_b=tensors.get("encoder.b_head_b"),
        activation=meta["activation"],
    )
    model = GsnModel(enc, rec, corruption, meta["condition_output_biases"])
    model.validate()
    return model
