"""Small fully-connected networks with hand-written backprop.

Everything downstream (policy, critic, constraint model) is built on one
two-layer tanh architecture, so the gradient code lives here once and is
checked once against finite differences.
"""

from __future__ import annotations

import numpy as np

PARAM_KEYS = ("w1", "b1", "w2", "b2")


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite parameters."""


class TwoLayerNet:
    """Linear -> tanh -> linear network.

    Weights start uniform in +-1/sqrt(fan_in); biases start at zero. The
    forward pass accepts a single input vector (1-D) or a batch (2-D).
    """

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator):
        if min(n_in, n_hidden, n_out) < 1:
            raise ValueError("layer sizes must be positive")
        lim1 = 1.0 / np.sqrt(n_in)
        lim2 = 1.0 / np.sqrt(n_hidden)
        self.w1 = rng.uniform(-lim1, lim1, size=(n_in, n_hidden))
        self.b1 = np.zeros(n_hidden)
        self.w2 = rng.uniform(-lim2, lim2, size=(n_hidden, n_out))
        self.b2 = np.zeros(n_out)
        self.n_in, self.n_hidden, self.n_out = n_in, n_hidden, n_out

    # ---- forward -----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass returning the output and the cache backprop needs."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        xb = x[None, :] if squeeze else x
        h = np.tanh(xb @ self.w1 + self.b1)
        y = h @ self.w2 + self.b2
        cache = (xb, h)
        return (y[0] if squeeze else y), cache

    # ---- backward ----------------------------------------------------

    def grads(self, cache, grad_out: np.ndarray) -> dict:
        """Parameter gradients of sum_b <grad_out[b], y[b]>.

        ``grad_out`` is the upstream gradient on the network output, one row
        per cached batch row (a 1-D vector is treated as a single row).
        """
        xb, h = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if g.ndim == 1:
            g = g[None, :]
        gw2 = h.T @ g
        gb2 = g.sum(axis=0)
        gh = (g @ self.w2.T) * (1.0 - h * h)
        gw1 = xb.T @ gh
        gb1 = gh.sum(axis=0)
        return {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}

    def apply_step(self, grads: dict, scale: float, label: str = "net"):
        """In-place parameter update ``p += scale * g`` with a finiteness guard."""
        for key in PARAM_KEYS:
            p = getattr(self, key)
            p += scale * grads[key]
            if not np.all(np.isfinite(p)):
                raise DivergenceError(f"{label} parameters diverged ({key})")

    # ---- (de)serialization helpers ------------------------------------

    def get_params(self) -> dict:
        return {k: getattr(self, k).copy() for k in PARAM_KEYS}

    def set_params(self, params: dict):
        for key in PARAM_KEYS:
            value = np.asarray(params[key], dtype=np.float64)
            if value.shape != getattr(self, key).shape:
                raise ValueError(f"shape mismatch for {key}")
            setattr(self, key, value.copy())

    def param_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in PARAM_KEYS])

    def set_param_vector(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        i = 0
        for key in PARAM_KEYS:
            shape = getattr(self, key).shape
            size = int(np.prod(shape))
            setattr(self, key, vec[i : i + size].reshape(shape).copy())
            i += size
        if i != vec.size:
            raise ValueError("parameter vector has wrong length")


def flat_grads(grads: dict) -> np.ndarray:
    """Flatten a gradient dict in the same order as ``param_vector``."""
    return np.concatenate([np.asarray(grads[k]).ravel() for k in PARAM_KEYS])


class Adam:
    """Adam optimizer state for one TwoLayerNet.

    Per-parameter adaptive steps; needed where plain gradient descent crawls
    (the constraint regression's feature matrix is badly conditioned).
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: 0.0 for k in PARAM_KEYS}
        self.v = {k: 0.0 for k in PARAM_KEYS}
        self.t = 0

    def step(self, net: TwoLayerNet, grads: dict, lr: float, label: str = "net"):
        """One descent step along the bias-corrected moment estimates."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for key in PARAM_KEYS:
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            p = getattr(net, key)
            p -= lr * (self.m[key] / c1) / (np.sqrt(self.v[key] / c2) + self.eps)
            if not np.all(np.isfinite(p)):
                raise DivergenceError(f"{label} parameters diverged ({key})")
