"""Quantitative evaluation: CSL log-likelihood estimates, exact stationary
distributions on enumerable binary spaces, KL divergence, and the spurious
sample metric used for the 2D experiments.

The CSL estimate of log p(x) averages reconstruction probabilities over
latent (corrupted-state) samples collected from the chain:

    CSL(x) = log( (1/S) * sum_s P_recon(x | encoder(h_s)) )

computed with a log-sum-exp over the per-latent log-probabilities.  It is
conservative: by Jensen's inequality its expectation lies at or below the log
of the chain's marginal.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import recon as R
from .data import Dataset
from .net import encoder_forward


@dataclass
class TransitionMatrix:
    """Row-stochastic transition matrix over an enumerated binary space."""

    entries: np.ndarray  # (2^d, 2^d)
    d: int

    def __post_init__(self):
        n = self.entries.shape[0]
        if self.entries.shape != (n, n) or n != 2 ** self.d:
            raise ValueError("transition matrix must be (2^d, 2^d)")
        if np.any(self.entries < -1e-12):
            raise ValueError("transition matrix has negative entries")
        rowsum = self.entries.sum(axis=1)
        if np.max(np.abs(rowsum - 1.0)) > 1e-9:
            raise ValueError("transition matrix rows must sum to 1")


@dataclass
class CslReport:
    mean_csl_nats: float
    n_latents: int
    stride: int
    n_test: int


def csl_logprob_matrix(model, X_test, latents):
    """(n_test, S) matrix of log P_recon(x_i | encoder(h_s)).

    This is the expensive part of CSL; computing it once supports estimates
    at any number of latent-sample prefixes.
    """
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    latents = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    if latents.shape[0] == 0:
        raise ValueError("latents must be nonempty")
    cond_c, cond_b, _ = encoder_forward(model.encoder, latents)
    if model.encoder.W_head_b is None:
        cond_b = np.zeros((cond_c.shape[0], 0))
    out = np.empty((X_test.shape[0], latents.shape[0]))
    for t, x in enumerate(X_test):
        out[t] = R.log_prob_batch(model.recon, cond_c, cond_b, x.reshape(1, -1))
    return out


def csl_from_matrix(logprobs, n_latents=None):
    """Per-test-point CSL from a log-probability matrix (optionally using
    only the first ``n_latents`` columns, i.e. a prefix of the chain)."""
    S = logprobs.shape[1] if n_latents is None else int(n_latents)
    if not 1 <= S <= logprobs.shape[1]:
        raise ValueError("n_latents out of range")
    return logsumexp(logprobs[:, :S], axis=1) - np.log(S)


def csl_per_example(model, X_test, latents):
    return csl_from_matrix(csl_logprob_matrix(model, X_test, latents))


def csl_estimate(model, test: Dataset, latents, stride=1) -> CslReport:
    """Mean CSL over the test set given chain latents (corrupted states)."""
    latents = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    if latents.shape[0] == 0:
        raise ValueError("latents must be nonempty")
    per_example = csl_per_example(model, test.examples, latents)
    return CslReport(
        mean_csl_nats=float(np.mean(per_example)),
        n_latents=latents.shape[0],
        stride=stride,
        n_test=test.n_examples,
    )


def append_metric_row(path, tag, n_samples, stride, value_nats):
    """Append a (tag, n_samples, stride, value_nats) row to a metrics CSV,
    writing the header when the file is new.  Shared by CSL reports and KL
    results so experiment folders accumulate one uniform table."""
    import csv
    import os

    new_file = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["tag", "n_samples", "stride", "value_nats"])
        writer.writerow([tag, n_samples, stride, repr(float(value_nats))])


def stationary_distribution(T: TransitionMatrix, tol=1e-12, max_iters=1_000_000):
    """Fixed point of the row-stochastic matrix by power iteration from the
    uniform distribution; converged when successive L1 change < tol."""
    M = T.entries
    pi = np.full(M.shape[0], 1.0 / M.shape[0])
    for _ in range(max_iters):
        nxt = pi @ M
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise RuntimeError(
        "power iteration did not converge (periodic or reducible chain?)")


def kl_divergence(p, q):
    """KL(p || q) in nats; terms with p_i = 0 contribute nothing.  Support
    violations (p_i > 0 where q_i = 0) yield +inf with a warning."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be nonnegative")
    for name, vec in (("p", p), ("q", q)):
        if abs(vec.sum() - 1.0) > 1e-8:
            raise ValueError(f"{name} must sum to 1")
    mask = p > 0
    if np.any(q[mask] == 0):
        warnings.warn("KL support violation: p puts mass where q has none")
        return float("inf")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def spurious_fraction(generated: Dataset, reference: Dataset, epsilon):
    """Fraction of generated points farther than epsilon (Euclidean) from
    their nearest reference point; brute force in chunks."""
    if reference.n_examples == 0:
        raise ValueError("reference dataset is empty")
    if generated.n_dims != reference.n_dims:
        raise ValueError("dimension mismatch between generated and reference data")
    if generated.n_examples == 0:
        return 0.0
    ref = reference.examples
    ref_sq = np.sum(ref * ref, axis=1)
    n_far = 0
    chunk = max(1, int(2e7) // max(1, ref.shape[0]))
    for start in range(0, generated.n_examples, chunk):
        G = generated.examples[start:start + chunk]
        d2 = np.sum(G * G, axis=1)[:, None] - 2.0 * (G @ ref.T) + ref_sq[None, :]
        nearest = np.sqrt(np.maximum(d2.min(axis=1), 0.0))
        n_far += int(np.sum(nearest > epsilon))
    return n_far / generated.n_examples


def enumerate_model_distribution(recon_params, cond: R.CondBiases, max_dims=12):
    """Exact probability vector over {0,1}^d for a binary reconstruction
    distribution, by evaluating the log-likelihood at every point."""
    if R.data_kind(recon_params) != "binary":
        raise ValueError("enumeration requires a binary reconstruction distribution")
    d = recon_params.n_dims
    if d > max_dims:
        raise ValueError(f"state space too large: {d} dims > {max_dims}")
    from .gsn import binary_states  # local import to avoid a module cycle

    states = binary_states(d)
    lp = R.log_prob_batch(recon_params, cond.c.reshape(1, -1), cond.b.reshape(1, -1), states)
    return np.exp(lp)
