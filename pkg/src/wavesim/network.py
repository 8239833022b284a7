"""Coordinate network with forward-mode spatial jets.

A jet is an array of shape ``(5, n_points, n_features)`` whose planes hold
the value and the derivatives ``d/dx``, ``d/dz``, ``d2/dx2``, ``d2/dz2`` of
every feature. Mixed derivatives never appear in the Helmholtz residuals, so
they are not carried.
"""

from dataclasses import dataclass, field

import numpy as np

VALUE, DX, DZ, DXX, DZZ = range(5)
N_PLANES = 5


@dataclass(frozen=True)
class Architecture:
    """Encoder level ``K`` and hidden widths; the last width is ``P``."""

    K: int = 3
    hidden_sizes: tuple = (64, 64, 64, 64)
    out_dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.K < 0:
            raise ValueError("encoder level K must be non-negative")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("need at least one hidden layer of width >= 1")
        if self.out_dim != 2:
            raise ValueError("output dimension is fixed at 2 (real, imaginary)")

    @property
    def in_dim(self):
        return encoded_dim(self.K)

    @property
    def P(self):
        return self.hidden_sizes[-1]

    @property
    def layer_shapes(self):
        sizes = (self.in_dim,) + self.hidden_sizes
        return list(zip(sizes[:-1], sizes[1:]))


@dataclass(eq=False)
class NetworkParams:
    """Hidden weights ``(fan_in, fan_out)``, biases and output weights ``(P, 2)``."""

    weights: list
    biases: list
    W_out: np.ndarray
    arch: Architecture = field(default_factory=Architecture)

    def copy(self):
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases],
                             self.W_out.copy(), self.arch)

    def hidden(self):
        """Flat list of hidden arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def encoded_dim(K):
    return 2 + 4 * (K + 1)


def encode_jet(points, K):
    """Positional encoding with exact jets.

    Features are ``[x, z]`` followed, for each ``k = 0..K``, by
    ``sin(2^k x), cos(2^k x), sin(2^k z), cos(2^k z)``.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    n = p.shape[0]
    jet = np.zeros((N_PLANES, n, encoded_dim(K)))
    x, z = p[:, 0], p[:, 1]
    jet[VALUE, :, 0] = x
    jet[DX, :, 0] = 1.0
    jet[VALUE, :, 1] = z
    jet[DZ, :, 1] = 1.0
    col = 2
    for k in range(K + 1):
        f = 2.0 ** k
        for coord, d1, d2 in ((x, DX, DXX), (z, DZ, DZZ)):
            s, c = np.sin(f * coord), np.cos(f * coord)
            jet[VALUE, :, col] = s
            jet[d1, :, col] = f * c
            jet[d2, :, col] = -f * f * s
            jet[VALUE, :, col + 1] = c
            jet[d1, :, col + 1] = -f * s
            jet[d2, :, col + 1] = -f * f * c
            col += 2
    return jet


def init_params(arch, seed=0):
    """Uniform ``[-sqrt(6/fan_in), sqrt(6/fan_in)]`` weights, zero biases, zero ``W_out``."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_shapes:
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, np.zeros((arch.P, arch.out_dim)), arch)


def _sine_jet(a):
    s = np.sin(a[VALUE])
    c = np.cos(a[VALUE])
    out = np.empty_like(a)
    out[VALUE] = s
    out[DX] = c * a[DX]
    out[DZ] = c * a[DZ]
    out[DXX] = c * a[DXX] - s * a[DX] ** 2
    out[DZZ] = c * a[DZZ] - s * a[DZ] ** 2
    return out, s, c


def forward_jet(params, jet, return_cache=False):
    """Propagate an input jet through the hidden layers.

    Returns the penultimate-layer jet ``H`` of shape ``(5, n, P)``; the
    output layer is not applied. With ``return_cache`` the per-layer
    intermediates needed by :func:`backprop_params` are returned as well.
    """
    h = np.asarray(jet, dtype=float)
    if h.shape[0] != N_PLANES or h.shape[2] != params.weights[0].shape[0]:
        raise ValueError(f"input jet shape {h.shape} does not match the first layer")
    cache = []
    for w, b in zip(params.weights, params.biases):
        a = h @ w
        a[VALUE] += b
        out, s, c = _sine_jet(a)
        cache.append((h, a, s, c))
        h = out
    if return_cache:
        return h, cache
    return h


def forward_values(params, X):
    """Plain forward pass on value planes only."""
    h = np.asarray(X, dtype=float)
    for w, b in zip(params.weights, params.biases):
        h = np.sin(h @ w + b)
    return h


def output_apply(H, W):
    """``U_s = H @ W``; column 0 is the real part, column 1 the imaginary."""
    return np.asarray(H) @ np.asarray(W)


def backprop_params(params, jet, upstream, cache=None):
    """Reverse-accumulate ``dL/dH-jet`` into hidden-layer gradients.

    ``upstream`` has the shape of the ``H`` jet. Returns ``(grad_weights,
    grad_biases)`` as lists aligned with ``params.weights``/``params.biases``.
    The output weights are not touched.
    """
    if cache is None:
        _, cache = forward_jet(params, jet, return_cache=True)
    g = np.asarray(upstream, dtype=float)
    gws = [None] * len(params.weights)
    gbs = [None] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        h, a, s, c = cache[layer]
        ga = np.empty_like(g)
        ga[VALUE] = (g[VALUE] * c
                     - s * (g[DX] * a[DX] + g[DZ] * a[DZ]
                            + g[DXX] * a[DXX] + g[DZZ] * a[DZZ])
                     - c * (g[DXX] * a[DX] ** 2 + g[DZZ] * a[DZ] ** 2))
        ga[DX] = g[DX] * c - 2.0 * g[DXX] * s * a[DX]
        ga[DZ] = g[DZ] * c - 2.0 * g[DZZ] * s * a[DZ]
        ga[DXX] = g[DXX] * c
        ga[DZZ] = g[DZZ] * c
        w = params.weights[layer]
        gws[layer] = h.reshape(-1, h.shape[2]).T @ ga.reshape(-1, ga.shape[2])
        gbs[layer] = ga[VALUE].sum(axis=0)
        if layer > 0:
            g = ga @ w.T
    return gws, gbs
