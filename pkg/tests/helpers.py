"""Shared test oracles: central finite differences and tolerance helpers.

The finite-difference gradient is the independent check for every manual
backward pass in the package; it only ever calls the forward function.
"""

import numpy as np

FD_STEP = 1e-5
FD_RTOL = 1e-4


def finite_diff_grads(f, tensors, step=FD_STEP):
    """Central-difference gradient of the scalar f() wrt each named tensor.

    ``tensors`` maps names to arrays that f reads; entries are perturbed in
    place and restored.
    """
    grads = {}
    for name, arr in tensors.items():
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f()
            flat[i] = orig - step
            f_minus = f()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * step)
        grads[name] = g.reshape(arr.shape)
    return grads


def max_rel_err(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1e-4, np.abs(a) + np.abs(n))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def assert_grads_match(analytic, numeric, rtol=FD_RTOL, context=""):
    for name, num in numeric.items():
        assert name in analytic, f"missing analytic gradient for {name} {context}"
        err = max_rel_err(analytic[name], num)
        assert err < rtol, f"{name}: rel err {err:.3e} >= {rtol} {context}"


def binomial_3sigma(p, n):
    """Half-width of the 3-sigma band for an empirical frequency."""
    return 3.0 * np.sqrt(p * (1.0 - p) / n)
