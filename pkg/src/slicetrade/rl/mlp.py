"""Fixed-topology fully connected network with hand-written backprop."""
from __future__ import annotations

import numpy as np

_ACTS = ("relu", "tanh", "identity")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class Mlp:
    """Dense layers ``sizes[0] -> ... -> sizes[-1]``.

    Hidden layers use ``hidden_act``; the last layer uses ``out_act``.
    Weights and biases are drawn uniformly from +-1/sqrt(fan_in).
    """

    def __init__(self, sizes, out_act="tanh", hidden_act="relu", rng=None):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if out_act not in _ACTS or hidden_act not in _ACTS:
            raise ValueError(f"activations must be one of {_ACTS}")
        rng = np.random.default_rng() if rng is None else rng
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        self.hidden_act = hidden_act
        self.W, self.b = [], []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            lim = 1.0 / np.sqrt(fan_in)
            self.W.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            self.b.append(rng.uniform(-lim, lim, size=fan_out))
        self._cache = None

    @property
    def params(self) -> list:
        out = []
        for W, b in zip(self.W, self.b):
            out += [W, b]
        return out

    def param_names(self) -> list:
        names = []
        for k in range(len(self.W)):
            names += [f"W{k}", f"b{k}"]
        return names

    def copy_from(self, other: "Mlp") -> None:
        for dst, src in zip(self.params, other.params):
            if dst.shape != src.shape:
                raise ValueError("shape mismatch")
            dst[...] = src

    def clone(self) -> "Mlp":
        new = object.__new__(Mlp)
        new.sizes, new.out_act, new.hidden_act = self.sizes, self.out_act, self.hidden_act
        new.W = [w.copy() for w in self.W]
        new.b = [b.copy() for b in self.b]
        new._cache = None
        return new

    def _activation(self, layer):
        return self.out_act if layer == len(self.W) - 1 else self.hidden_act

    def forward(self, x, cache=True):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite network input")
        single = x.ndim == 1
        h = x[None, :] if single else x
        inputs, pre, post = [], [], []
        for k, (W, b) in enumerate(zip(self.W, self.b)):
            inputs.append(h)
            z = h @ W + b
            h = _act(self._activation(k), z)
            pre.append(z)
            post.append(h)
        if cache:
            self._cache = (inputs, pre, post, single)
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_out):
        """Gradients of ``sum(grad_out * output)`` w.r.t. parameters and input.

        Uses the activations cached by the last ``forward``. Returns
        ``(grads, grad_input)`` with ``grads`` ordered like ``params``.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        inputs, pre, post, single = self._cache
        g = np.asarray(grad_out, dtype=float)
        if single:
            g = g[None, :]
        grads = [None] * (2 * len(self.W))
        for k in reversed(range(len(self.W))):
            g = g * _act_grad(self._activation(k), pre[k], post[k])
            grads[2 * k] = inputs[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.W[k].T
        return grads, (g[0] if single else g)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr < 0:
            raise ValueError("learning rate must be >= 0")
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """In place: target <- tau * online + (1 - tau) * target."""
    for t, o in zip(target.params, online.params):
        if t.shape != o.shape:
            raise ValueError("target and online shapes differ")
        t *= 1.0 - tau
        t += tau * o
