"""Corruption processes: the noise half of the corrupt-then-reconstruct chain.

Corruption is parameter-less: it never reads or mutates model weights.  Two
kinds are supported: additive isotropic Gaussian noise for continuous data
and salt-and-pepper for binary data (each coordinate is replaced by a fair
coin flip with the given probability).  The salt-and-pepper level may be the
tag ``"dynamic"``, meaning a fresh U(0, 1) level is drawn per example
presentation.
"""

from dataclasses import dataclass

import numpy as np

from .validation import is_binary

GAUSSIAN = "gaussian"
SALT_PEPPER = "salt_pepper"
DYNAMIC = "dynamic"


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    sigma: float | None = None  # gaussian only
    level: float | str | None = None  # salt_pepper only; float in [0,1] or "dynamic"

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if self.sigma is None or self.sigma < 0:
                raise ValueError("gaussian corruption requires sigma >= 0")
        elif self.kind == SALT_PEPPER:
            if self.level == DYNAMIC:
                return
            if not isinstance(self.level, (int, float)) or not 0.0 <= self.level <= 1.0:
                raise ValueError("salt_pepper corruption requires level in [0,1] or 'dynamic'")
        else:
            raise ValueError(f"unknown corruption kind {self.kind!r}")


def gaussian_corrupt(x, sigma, rng):
    """x + N(0, sigma^2 I); sigma=0 returns x unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("input to gaussian_corrupt is not finite")
    if sigma == 0:
        return x.copy()
    return x + sigma * rng.standard_normal(size=x.shape)


def salt_pepper_corrupt(x, level, rng):
    """Replace each coordinate by a fresh Bernoulli(0.5) draw with prob level.

    ``level`` may be a scalar or, for batched input, a per-row vector.
    """
    x = np.asarray(x, dtype=np.float64)
    if not is_binary(x):
        raise ValueError("salt_pepper_corrupt expects binary input")
    level_arr = np.asarray(level, dtype=np.float64)
    if np.any(level_arr < 0) or np.any(level_arr > 1):
        raise ValueError("level must lie in [0, 1]")
    if level_arr.ndim == 1 and x.ndim == 2:
        level_arr = level_arr[:, None]
    replace_mask = rng.random(size=x.shape) < level_arr
    coins = (rng.random(size=x.shape) < 0.5).astype(np.float64)
    return np.where(replace_mask, coins, x)


def draw_dynamic_level(rng):
    """One U(0, 1) noise level, drawn per training example presentation."""
    return float(rng.uniform(0.0, 1.0))


def corrupt(spec: CorruptionSpec, x, rng):
    """Apply the corruption described by ``spec`` to a vector or batch.

    For dynamic salt-and-pepper, one level is drawn per row (per example).
    """
    x = np.asarray(x, dtype=np.float64)
    if spec.kind == GAUSSIAN:
        return gaussian_corrupt(x, spec.sigma, rng)
    if spec.level == DYNAMIC:
        n_rows = x.shape[0] if x.ndim == 2 else None
        if n_rows is None:
            level = draw_dynamic_level(rng)
        else:
            level = rng.uniform(0.0, 1.0, size=n_rows)
        return salt_pepper_corrupt(x, level, rng)
    return salt_pepper_corrupt(x, spec.level, rng)
