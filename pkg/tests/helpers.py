"""Shared builders for the LS and training tests."""

import numpy as np

from conftest import make_problem
from wavesim.lsq import lsgd_loss_and_grad
from wavesim.network import VALUE, Architecture, backprop_params, forward_jet, init_params
from wavesim.training import TrainConfig, assemble_batch, sample_batch


def random_setup(pml, seed=0, N=40, N_C=8, K=1, hidden=(6, 5), beta=1.0,
                 constraint_block="diagonal"):
    """Scaled problem, config, batch and params with random output weights."""
    prob = make_problem(pml=pml).scaled(1e-3)
    cfg = TrainConfig(mode="lsgd", N=N, N_C=N_C, pml_enabled=pml, beta=beta,
                      constraint_block=constraint_block)
    rng = np.random.default_rng(seed)
    batch = sample_batch(prob, cfg, K, rng)
    params = init_params(Architecture(K, hidden), seed)
    for b in params.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    params.W_out = rng.normal(size=params.W_out.shape)
    return prob, cfg, batch, params


def lsgd_loss(params, batch, prob, cfg, eps):
    H = forward_jet(params, batch.jet)
    return lsgd_loss_and_grad(assemble_batch(H, batch, prob, cfg), eps)[0]


def lsgd_hidden_grads(params, batch, prob, cfg, eps):
    """Analytic gradient of the LS-embedded loss w.r.t. the hidden arrays."""
    H, cache = forward_jet(params, batch.jet, return_cache=True)
    sys = assemble_batch(H, batch, prob, cfg)
    _, _, grad_D = lsgd_loss_and_grad(sys, eps)
    g_jet, g_Hc = sys.pullback(grad_D)
    g_H = np.zeros_like(H)
    g_H[:, :batch.N] = g_jet
    g_H[VALUE, batch.N:] = g_Hc
    gws, gbs = backprop_params(params, None, g_H, cache=cache)
    out = []
    for gw, gb in zip(gws, gbs):
        out += [gw, gb]
    return out


def max_fd_error(fn, arrays, grads, rtol, atol, h=1e-6):
    """Largest ``|g - fd| / (rtol |fd| + atol)`` over every entry of ``arrays``.

    A value ``<= 1`` means every entry passes.
    """
    worst = 0.0
    for arr, g in zip(arrays, grads):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            fp = fn()
            arr[idx] = old - h
            fm = fn()
            arr[idx] = old
            fd = (fp - fm) / (2 * h)
            worst = max(worst, abs(g[idx] - fd) / (rtol * abs(fd) + atol))
    return worst


def hidden_size(params):
    return sum(a.size for a in params.hidden())


__all__ = ["random_setup", "lsgd_loss", "lsgd_hidden_grads", "max_fd_error",
           "hidden_size", "make_problem", "record", "ACCEPTANCE"]


# criterion number -> (passed, detail); printed by the terminal summary hook
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}: {detail}")
