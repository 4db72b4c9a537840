"""Fully connected networks with hand-written backpropagation."""

from __future__ import annotations

import numpy as np

from ..numerics import make_rng

_ACTIVATIONS = ("linear", "tanh")


class Mlp:
    """Affine layers with ``tanh`` hidden units.

    ``weights[i]`` has shape ``(fan_in, fan_out)`` so a batch ``X`` of shape
    ``(B, fan_in)`` maps to ``X @ W + b``. The output activation is
    ``"linear"`` (critics) or ``"tanh"`` (policies squashed to [-1, 1]).
    """

    def __init__(self, sizes, output_activation="linear", rng=None, weights=None, biases=None):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output size")
        if output_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {output_activation!r}")
        self.sizes = [int(s) for s in sizes]
        self.output_activation = output_activation
        if weights is None:
            rng = make_rng(rng)
            weights, biases = [], []
            for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
                biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i} parameters do not match sizes {self.sizes}")

    @property
    def n_layers(self):
        return len(self.weights)

    def forward(self, x):
        """Return ``(output, cache)``; ``x`` may be one vector or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {h.shape[1]}")
        acts = [h]
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < last or self.output_activation == "tanh":
                h = np.tanh(z)
            else:
                h = z
            acts.append(h)
        out = h[0] if single else h
        return out, (single, acts)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, output_grad):
        """Gradients of ``sum(output * output_grad)``.

        Returns ``(weight_grads, bias_grads, input_grad)``.
        """
        single, acts = cache
        g = np.asarray(output_grad, dtype=float)
        if single:
            g = g[None, :]
        last = self.n_layers - 1
        wg = [None] * self.n_layers
        bg = [None] * self.n_layers
        for i in range(last, -1, -1):
            out = acts[i + 1]
            if i < last or self.output_activation == "tanh":
                g = g * (1.0 - out * out)
            wg[i] = acts[i].T @ g
            bg[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return wg, bg, (g[0] if single else g)

    def apply_gradients(self, wg, bg, step):
        """In-place ``theta += step * grad`` (use a negative step to descend)."""
        for w, b, dw, db in zip(self.weights, self.biases, wg, bg):
            w += step * dw
            b += step * db

    def parameters(self):
        return self.weights + self.biases

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for p in self.parameters():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != flat.size:
            raise ValueError("flat parameter vector has the wrong length")

    def copy(self):
        return Mlp(self.sizes, self.output_activation, weights=self.weights, biases=self.biases)

    def soft_update_from(self, online, tau):
        """``theta' <- tau * theta + (1 - tau) * theta'``."""
        for mine, theirs in zip(self.parameters(), online.parameters()):
            mine *= 1.0 - tau
            mine += tau * theirs


def write_networks(path, nets):
    """Dump named networks to a plain-text file.

    Layout::

        network <name> <output_activation> <n_layers> <size_0> ... <size_L>
        weight <layer> <rows> <cols>
        <rows*cols whitespace-separated values, row-major>
        bias <layer> <n>
        <n values>

    Values are written with 17 significant digits, so loading is exact.
    """
    lines = []
    for name, net in nets.items():
        sizes = " ".join(str(s) for s in net.sizes)
        lines.append(f"network {name} {net.output_activation} {net.n_layers} {sizes}")
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            lines.append(f"weight {i} {w.shape[0]} {w.shape[1]}")
            lines.append(" ".join(format(v, ".17g") for v in w.ravel()))
            lines.append(f"bias {i} {b.shape[0]}")
            lines.append(" ".join(format(v, ".17g") for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_networks(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    nets = {}
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        if head[0] != "network":
            raise ValueError(f"expected a network header at line {i + 1}")
        name, act, n_layers = head[1], head[2], int(head[3])
        sizes = [int(s) for s in head[4:]]
        i += 1
        weights, biases = [], []
        for _ in range(n_layers):
            _, _, rows, cols = lines[i].split()
            weights.append(np.array(lines[i + 1].split(), dtype=float).reshape(int(rows), int(cols)))
            _, _, n = lines[i + 2].split()
            biases.append(np.array(lines[i + 3].split(), dtype=float).reshape(int(n)))
            i += 4
        nets[name] = Mlp(sizes, act, weights=weights, biases=biases)
    return nets
