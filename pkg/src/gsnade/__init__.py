"""Generative stochastic networks with multimodal transition operators.

The transition operator of the sampling Markov chain is corrupt-then-
reconstruct; the reconstruction distribution can be factorial (Bernoulli or
Gaussian) or autoregressive (NADE for binary data, RNADE with Gaussian
mixture outputs for continuous data), conditioned on the corrupted state
through a learned encoder.  ``GSN`` is the scikit-learn style entry point;
the submodules expose the underlying pieces.
"""

from .corruption import CorruptionSpec, draw_dynamic_level, gaussian_corrupt, salt_pepper_corrupt
from .data import (Dataset, MinibatchPlan, binarize, gen_spiral, load_mnist_idx,
                   next_minibatch)
from .estimator import GSN
from .evaluation import (CslReport, TransitionMatrix, csl_estimate, enumerate_model_distribution,
                         kl_divergence, spurious_fraction, stationary_distribution)
from .gsn import (ChainState, GsnModel, TrainConfig, TrainReport, build_model,
                  collect_latents, denoise_loss_and_grads, exact_transition_matrix,
                  load_model, run_chain, save_model, train, walkback_loss_and_grads)
from .net import DivergenceError, SgdConfig
from .recon import CondBiases, NadeParams, RnadeParams

__all__ = [
    "GSN",
    "CorruptionSpec", "gaussian_corrupt", "salt_pepper_corrupt", "draw_dynamic_level",
    "Dataset", "MinibatchPlan", "binarize", "gen_spiral", "load_mnist_idx", "next_minibatch",
    "CslReport", "TransitionMatrix", "csl_estimate", "enumerate_model_distribution",
    "kl_divergence", "spurious_fraction", "stationary_distribution",
    "ChainState", "GsnModel", "TrainConfig", "TrainReport", "build_model",
    "collect_latents", "denoise_loss_and_grads", "exact_transition_matrix",
    "load_model", "run_chain", "save_model", "train", "walkback_loss_and_grads",
    "DivergenceError", "SgdConfig", "CondBiases", "NadeParams", "RnadeParams",
]

__version__ = "0.1.0"
