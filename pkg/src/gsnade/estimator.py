"""Scikit-learn style front door: fit a GSN on a data matrix, then sample
from its Markov chain and score held-out data with the CSL estimator.

The class follows the usual estimator conventions (constructor stores
hyperparameters verbatim, ``fit`` returns ``self``, fitted state lives in
trailing-underscore attributes, ``get_params``/``set_params`` inherited from
``BaseEstimator``), so it composes with model-selection tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import evaluation, gsn
from .corruption import GAUSSIAN, SALT_PEPPER, CorruptionSpec
from .data import BINARY, CONTINUOUS, Dataset
from .net import SgdConfig
from .validation import as_float_matrix, require_binary

_BINARY_RECONS = ("nade", "factorial_bernoulli")
_CONTINUOUS_RECONS = ("rnade", "factorial_gaussian")


class GSN(BaseEstimator):
    """Generative stochastic network density sampler.

    Parameters
    ----------
    recon : one of 'nade', 'rnade', 'factorial_bernoulli', 'factorial_gaussian'
        Reconstruction distribution of the transition operator.  NADE and
        the factorial Bernoulli expect binary data (entries in {0, 1});
        RNADE and the factorial Gaussian expect continuous data.
    n_hidden : int, hidden width of the autoregressive reconstruction.
    encoder_hidden : int, hidden width of the conditioning network.
    n_components : int, Gaussian mixture components per dimension (rnade).
    extra_hidden : int, optional second stage of the NADE output head.
    activation : 'tanh' or 'sigmoid', encoder hidden activation.
    condition_output_biases : bool, whether the encoder also produces
        output-bias offsets (the hidden biases are always conditioned).
    corruption : 'salt_pepper' or 'gaussian'.
    noise_level : float in [0, 1] or 'dynamic', salt-and-pepper level;
        'dynamic' redraws the level uniformly per example presentation.
    sigma : float, Gaussian corruption standard deviation.
    mode : 'plain' or 'walkback' training objective.
    walkback_steps : int, extra reconstruction rounds in walkback mode.
    epochs, batch_size, learning_rate, momentum, weight_decay : SGD schedule.
    random_state : int, seeds initialization, shuffling and corruption noise.
    """

    def __init__(self, recon="nade", n_hidden=64, encoder_hidden=64,
                 n_components=5, extra_hidden=0, activation="tanh",
                 condition_output_biases=True, corruption="salt_pepper",
                 noise_level=0.25, sigma=0.3, mode="plain", walkback_steps=5,
                 epochs=10, batch_size=100, learning_rate=0.05, momentum=0.0,
                 weight_decay=0.0, random_state=0):
        self.recon = recon
        self.n_hidden = n_hidden
        self.encoder_hidden = encoder_hidden
        self.n_components = n_components
        self.extra_hidden = extra_hidden
        self.activation = activation
        self.condition_output_biases = condition_output_biases
        self.corruption = corruption
        self.noise_level = noise_level
        self.sigma = sigma
        self.mode = mode
        self.walkback_steps = walkback_steps
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _corruption_spec(self):
        if self.corruption == SALT_PEPPER:
            return CorruptionSpec(SALT_PEPPER, level=self.noise_level)
        if self.corruption == GAUSSIAN:
            return CorruptionSpec(GAUSSIAN, sigma=self.sigma)
        raise ValueError(f"unknown corruption {self.corruption!r}")

    def _data_kind(self):
        if self.recon in _BINARY_RECONS:
            return BINARY
        if self.recon in _CONTINUOUS_RECONS:
            return CONTINUOUS
        raise ValueError(f"unknown reconstruction {self.recon!r}")

    def fit(self, X, y=None):
        """Train the transition operator on rows of X; returns self."""
        X = as_float_matrix(X)
        kind = self._data_kind()
        if kind == BINARY:
            require_binary(X, "X (binary reconstruction selected)")
        dataset = Dataset(X, kind)
        model = gsn.build_model(
            self.recon, dataset.n_dims,
            encoder_hidden=self.encoder_hidden, nade_hidden=self.n_hidden,
            k=self.n_components, extra_hidden=self.extra_hidden,
            activation=self.activation,
            condition_output_biases=self.condition_output_biases,
            corruption=self._corruption_spec(), seed=self.random_state,
        )
        cfg = gsn.TrainConfig(
            epochs=self.epochs,
            batch_size=min(self.batch_size, dataset.n_examples),
            sgd=SgdConfig(self.learning_rate, self.momentum, self.weight_decay),
            mode=self.mode, walkback_k=self.walkback_steps,
            seed=self.random_state,
        )
        self.model_, self.train_reports_ = gsn.train(model, dataset, cfg)
        self.n_features_in_ = dataset.n_dims
        rng = np.random.default_rng([self.random_state, 7])
        keep = min(64, dataset.n_examples)
        idx = rng.choice(dataset.n_examples, size=keep, replace=False)
        self.init_states_ = X[idx].copy()
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this GSN instance is not fitted yet; call fit first")

    def _rng(self, random_state, salt):
        if random_state is None:
            return np.random.default_rng([self.random_state, salt])
        return np.random.default_rng(random_state)

    def _chain_start(self, rng):
        return self.init_states_[rng.integers(self.init_states_.shape[0])]

    def sample(self, n_samples=1, sample_every=1, random_state=None):
        """Draw samples by running the chain, keeping every
        ``sample_every``-th visible state; returns (n_samples, n_dims)."""
        self._check_fitted()
        if n_samples < 0:
            raise ValueError("n_samples must be >= 0")
        rng = self._rng(random_state, 11)
        out = np.empty((n_samples, self.n_features_in_))
        if n_samples == 0:
            return out
        states = gsn.run_chain(self.model_, self._chain_start(rng),
                               n_samples * sample_every, rng,
                               record_every=sample_every)
        for i, st in enumerate(states[1:]):  # drop the initial state
            out[i] = st.x
        return out

    def score_samples(self, X, n_latents=1000, stride=1, random_state=None):
        """Per-row CSL estimate of log p(x) in nats, using ``n_latents``
        corrupted states collected from one chain at the given stride."""
        self._check_fitted()
        X = as_float_matrix(X)
        rng = self._rng(random_state, 13)
        latents = gsn.collect_latents(self.model_, self._chain_start(rng),
                                      n_latents, stride, rng)
        return evaluation.csl_per_example(self.model_, X, latents)

    def score(self, X, y=None, **kwargs):
        """Mean CSL over rows of X (higher is better)."""
        return float(np.mean(self.score_samples(X, **kwargs)))

    def transition_matrix(self):
        """Exact transition matrix (binary data, <= 12 dims only)."""
        self._check_fitted()
        return gsn.exact_transition_matrix(self.model_)
