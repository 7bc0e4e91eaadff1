import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gsnade.data import Dataset  # noqa: E402


def mnist_train_path():
    """Path to a real MNIST training-image IDX file, if one is available."""
    candidates = [os.environ.get("GSNADE_MNIST", "")]
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates.append(os.path.join(here, "data", "train-images-idx3-ubyte"))
    for cand in candidates:
        if cand and os.path.isfile(cand):
            return cand
    return None


requires_mnist = pytest.mark.skipif(
    mnist_train_path() is None,
    reason="real MNIST IDX file not available (set GSNADE_MNIST to enable)",
)


def stroke_image_corpus(n, seed=0, side=28):
    """Binary images of 1-3 random thick strokes: a multimodal, manifold-
    structured stand-in for thresholded digit images when the real MNIST
    file is not available."""
    rng = np.random.default_rng(seed)
    margin = min(5, side // 3)
    imgs = np.zeros((n, side, side))
    for i in range(n):
        for _ in range(rng.integers(1, 4)):
            r = float(rng.uniform(margin, side - margin))
            c = float(rng.uniform(margin, side - margin))
            angle = float(rng.uniform(0, 2 * np.pi))
            curl = float(rng.uniform(-0.35, 0.35))
            for _ in range(int(rng.integers(8, 22))):
                rr, cc = int(round(r)), int(round(c))
                if 0 <= rr < side - 1 and 0 <= cc < side - 1:
                    imgs[i, rr:rr + 2, cc:cc + 2] = 1.0
                angle += curl + float(rng.normal(0, 0.15))
                r += np.sin(angle)
                c += np.cos(angle)
    return Dataset(imgs.reshape(n, side * side), "binary")


def prototype_image_corpus(n, seed=0, side=28, n_prototypes=12, max_shift=2,
                           flip=0.02, prototype_seed=777):
    """Mode-structured binary images: each example is one of a fixed set of
    stroke prototypes, randomly shifted and bit-flipped.  Well-separated
    global modes make this a digit-like stand-in: a factorial transition
    operator is forced to blend prototypes, an autoregressive one is not.

    Prototypes depend only on ``prototype_seed``, so train/test corpora drawn
    with different ``seed`` values share the same modes.
    """
    protos = stroke_image_corpus(n_prototypes, seed=prototype_seed, side=side)
    protos = protos.examples.reshape(n_prototypes, side, side)
    rng = np.random.default_rng(seed)
    which = rng.integers(n_prototypes, size=n)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2))
    flips = rng.random((n, side, side)) < flip
    imgs = np.empty((n, side, side))
    for i in range(n):
        img = np.roll(protos[which[i]], tuple(shifts[i]), axis=(0, 1))
        imgs[i] = np.abs(img - flips[i])
    return Dataset(imgs.reshape(n, side * side), "binary")


def two_codeword_dataset(n, d=6, flip=0.1, seed=0):
    """Binary data concentrated on two complementary codewords plus
    independent per-bit flip noise; the workhorse tiny consistency task."""
    rng = np.random.default_rng(seed)
    code_a = np.zeros(d)
    code_b = np.ones(d)
    pick_b = rng.random(n) < 0.5
    X = np.where(pick_b[:, None], code_b, code_a)
    flips = rng.random((n, d)) < flip
    X = np.abs(X - flips.astype(np.float64))
    return Dataset(X, "binary")


def two_codeword_probs(d=6, flip=0.1):
    """Exact probability vector of the two-codeword distribution over
    {0,1}^d, indexed like gsn.binary_states."""
    from gsnade.gsn import binary_states

    states = binary_states(d)
    ham_a = states.sum(axis=1)  # distance to the all-zeros codeword
    ham_b = d - ham_a
    p = 0.5 * flip ** ham_a * (1 - flip) ** (d - ham_a) \
        + 0.5 * flip ** ham_b * (1 - flip) ** (d - ham_b)
    return p / p.sum()
