"""Training regimes: plain gradient descent (``gd``) on the PDE loss, and
LS-GD (``lsgd``) where the output weights come from a damped least-squares
solve inside every step and only the hidden layers are trained.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SolverError
from .lsq import (EpsilonSchedule, assemble_no_pml, assemble_pml,
                  epsilon_value, gamma_weights, lsgd_loss_and_grad)
from .medium import (background_wavefield, sample_velocity,
                     slowness_perturbation, stretching_state)
from .network import (DX, DXX, DZ, DZZ, VALUE, backprop_params, encode_jet,
                      forward_jet)

MODES = ("gd", "lsgd")


@dataclass
class TrainConfig:
    mode: str = "lsgd"
    pml_enabled: bool = False
    N: int = 500
    N_C: int | None = None
    beta: float = 1.0
    epochs: int = 2000
    lr_start: float = 2e-3
    lr_end: float = 7e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    eps_adam: float = 1e-8
    eps_schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    constraint_block: str = "diagonal"
    seed: int = 0
    validate_every: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.N < 1:
            raise ValueError("need at least one collocation point")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("need lr_start >= lr_end > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.N_C is None:
            self.N_C = max(64, self.N // 20)


@dataclass(eq=False)
class Batch:
    points: np.ndarray
    cpoints: np.ndarray
    jet: np.ndarray        # encoder jet of points followed by cpoints
    m: np.ndarray
    dm: np.ndarray
    u0: np.ndarray
    gamma: np.ndarray
    stretch: object = None

    @property
    def N(self):
        return self.points.shape[0]


@dataclass
class MetricsRecord:
    epoch: int
    loss: float
    val_rel_l2: float | None
    lr: float
    epsilon: float | None
    seconds: float


def sample_collocation(d, pml_enabled, N, rng, source=None, wavelength=None):
    """Uniform points over the outer box (PML) or the interior box.

    Points closer than ``1e-6 * wavelength`` to the source are redrawn.
    """
    box = d if pml_enabled else d.interior
    lo = np.array([box.x_min, box.z_min])
    hi = np.array([box.x_max, box.z_max])
    pts = rng.uniform(lo, hi, size=(N, 2))
    if source is not None and wavelength is not None:
        tol = 1e-6 * wavelength
        while True:
            close = np.hypot(pts[:, 0] - source.xs, pts[:, 1] - source.zs) < tol
            if not close.any():
                break
            pts[close] = rng.uniform(lo, hi, size=(int(close.sum()), 2))
    return pts


def sample_constraint(src, v0, N_C, rng, d=None):
    """Area-uniform points in the disk of radius ``lambda/4`` around the source."""
    radius = src.wavelength(v0) / 4.0
    r = radius * np.sqrt(rng.uniform(size=N_C))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=N_C)
    pts = np.stack([src.xs + r * np.cos(theta), src.zs + r * np.sin(theta)], axis=1)
    if d is not None:
        pts[:, 0] = np.clip(pts[:, 0], d.x_min, d.x_max)
        pts[:, 1] = np.clip(pts[:, 1], d.z_min, d.z_max)
    return pts


def make_batch(problem, points, cpoints, K):
    """Precompute medium samples and encoder jets for a batch.

    ``problem`` must already be in the network's length unit.
    """
    v = sample_velocity(problem.model, points)
    m, dm = slowness_perturbation(v, problem.v0)
    pml = problem.pml if problem.pml.enabled else None
    u0 = background_wavefield(points, problem.source, problem.v0,
                              problem.domain, pml)
    stretch = None
    if pml is not None:
        stretch = stretching_state(points, problem.domain, problem.damping())
    gamma = gamma_weights(cpoints, problem.source, problem.v0)
    jet = encode_jet(np.vstack([points, cpoints]), K)
    return Batch(points, cpoints, jet, m, dm, u0, gamma, stretch)


def sample_batch(problem, cfg, K, rng):
    pts = sample_collocation(problem.domain, cfg.pml_enabled, cfg.N, rng,
                             problem.source, problem.wavelength)
    cpts = sample_constraint(problem.source, problem.v0, cfg.N_C, rng,
                             problem.domain if cfg.pml_enabled else problem.domain.interior)
    return make_batch(problem, pts, cpts, K)


def _pde_residual(u, batch, omega, pml_enabled):
    """Pointwise residual of the scattered Helmholtz equation.

    ``u`` is the output jet ``(5, N, 2)``. Returns a complex vector for the
    stretched equation, or an ``(N, 2)`` real array otherwise.
    """
    w2 = omega ** 2
    if not pml_enabled:
        u0 = np.stack([batch.u0.real, batch.u0.imag], axis=1)
        lap = u[DXX] + u[DZZ]
        return lap + w2 * batch.m[:, None] * u[VALUE] + w2 * batch.dm[:, None] * u0
    st = batch.stretch
    uc = u[..., 0] + 1j * u[..., 1]
    return (st.de1_dx * uc[DX] + st.e1 * uc[DXX]
            + st.de2_dz * uc[DZ] + st.e2 * uc[DZZ]
            + st.e3 * w2 * (batch.m * uc[VALUE] + batch.dm * batch.u0))


def plain_losses(params, batch, pml_enabled, beta, omega, H=None, need_grad=False):
    """``L_PDE + beta * L_C`` evaluated pointwise from ``u_s = H W``.

    With ``need_grad`` also returns ``(g_H, W_grad)``: the gradient w.r.t. the
    full H-jet of ``batch.jet`` (constraint rows in the value plane) and
    w.r.t. the output weights.
    """
    if H is None:
        H = forward_jet(params, batch.jet)
    N = batch.N
    W = params.W_out
    u = H[:, :N] @ W
    uc = H[VALUE, N:] @ W
    r = _pde_residual(u, batch, omega, pml_enabled)
    if pml_enabled:
        pde = np.sum(np.abs(r) ** 2) / N
    else:
        pde = np.sum(r * r) / N
    Nc = uc.shape[0]
    g2 = batch.gamma ** 2
    con = np.sum(g2[:, None] * uc * uc) / Nc
    loss = float(pde + beta * con)
    if not need_grad:
        return loss

    g_u = np.zeros_like(u)
    if pml_enabled:
        st = batch.stretch
        coef = {VALUE: st.e3 * omega ** 2 * batch.m, DX: st.de1_dx,
                DZ: st.de2_dz, DXX: st.e1, DZZ: st.e2}
        cr = np.conj(r) * (2.0 / N)
        for plane, a in coef.items():
            prod = cr * a
            g_u[plane, :, 0] = prod.real
            g_u[plane, :, 1] = -prod.imag
    else:
        gr = (2.0 / N) * r
        g_u[VALUE] = omega ** 2 * batch.m[:, None] * gr
        g_u[DXX] = gr
        g_u[DZZ] = gr
    g_uc = (2.0 * beta / Nc) * g2[:, None] * uc

    g_H = np.zeros_like(H)
    g_H[:, :N] = g_u @ W.T
    g_H[VALUE, N:] = g_uc @ W.T
    g_W = np.einsum("pnk,pnj->kj", H[:, :N], g_u) + H[VALUE, N:].T @ g_uc
    return loss, g_H, g_W


def assemble_batch(H, batch, problem, cfg):
    """Build the LS system for the H-jet of ``batch.jet``."""
    N = batch.N
    Hj = H[:, :N]
    Hc = H[VALUE, N:]
    if cfg.pml_enabled:
        return assemble_pml(Hj, batch.stretch, batch.m, batch.dm, batch.u0, Hc,
                            batch.gamma, cfg.beta, problem.omega,
                            constraint_block=cfg.constraint_block)
    return assemble_no_pml(Hj, batch.m, batch.dm, batch.u0, Hc, batch.gamma,
                           cfg.beta, problem.omega)


@dataclass(eq=False)
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays):
        return cls([np.zeros_like(a) for a in arrays],
                   [np.zeros_like(a) for a in arrays])


def adam_update(state, params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam step; ``params`` are updated in place."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


def lr_value(cfg, epoch):
    """Exponential decay from ``lr_start`` at epoch 0 to ``lr_end`` at ``epochs``."""
    if cfg.epochs <= 0:
        return cfg.lr_start
    return cfg.lr_start * (cfg.lr_end / cfg.lr_start) ** (epoch / cfg.epochs)


def relative_l2(pred, ref):
    """``||pred - ref|| / ||ref||`` with real and imaginary parts stacked."""
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(pred - ref) / norm)


@dataclass(eq=False)
class TrainState:
    params: object
    opt: AdamState
    problem: object
    cfg: TrainConfig


def trainable(state):
    arrays = state.params.hidden()
    if state.cfg.mode == "gd":
        arrays.append(state.params.W_out)
    return arrays


def new_state(params, problem, cfg):
    state = TrainState(params, None, problem, cfg)
    state.opt = AdamState.zeros_like(trainable(state))
    return state


def _solve_with_retry(sys, eps, epoch):
    try:
        return lsgd_loss_and_grad(sys, eps)
    except SolverError:
        pass
    try:
        return lsgd_loss_and_grad(sys, 10.0 * eps)
    except SolverError as err:
        raise SolverError(f"epoch {epoch}: {err}", pivot=err.pivot, epoch=epoch) from err


def train_epoch(state, batch, epoch):
    """One optimizer step on ``batch``; returns ``(loss, eps)``.

    ``eps`` is ``None`` in ``gd`` mode. In ``lsgd`` mode ``state.params.W_out``
    is overwritten with the batch-optimal weights.
    """
    cfg = state.cfg
    params = state.params
    H, cache = forward_jet(params, batch.jet, return_cache=True)
    eps = None
    if cfg.mode == "lsgd":
        sys = assemble_batch(H, batch, state.problem, cfg)
        eps = epsilon_value(cfg.eps_schedule, epoch)
        loss, sol, grad_D = _solve_with_retry(sys, eps, epoch)
        g_jet, g_Hc = sys.pullback(grad_D)
        g_H = np.zeros_like(H)
        g_H[:, :batch.N] = g_jet
        g_H[VALUE, batch.N:] = g_Hc
        params.W_out = sol.W
        extra = []
    else:
        loss, g_H, g_W = plain_losses(params, batch, cfg.pml_enabled, cfg.beta,
                                      state.problem.omega, H=H, need_grad=True)
        extra = [g_W]
    gws, gbs = backprop_params(params, None, g_H, cache=cache)
    grads = []
    for gw, gb in zip(gws, gbs):
        grads += [gw, gb]
    grads += extra
    adam_update(state.opt, trainable(state), grads, lr_value(cfg, epoch),
                cfg.adam_beta1, cfg.adam_beta2, cfg.eps_adam)
    return loss, eps
