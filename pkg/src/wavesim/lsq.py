"""Least-squares system for the output layer.

The PDE residual is linear in the output weights, so for a batch of
penultimate features ``H`` the loss ``L_PDE + beta * L_C`` is exactly
``||D W - R||^2``. This module assembles ``(D, R)``, solves the damped normal
equations by Cholesky, and differentiates the solve.

Layouts
-------
``uncoupled``
    ``D`` is ``(N + N_C) x P`` and ``R`` is ``(N + N_C) x 2``; real and
    imaginary parts share ``D``.
``coupled``
    ``D`` is ``(2N + N_C') x 2P`` and ``R`` is ``(2N + N_C') x 1``; the
    unknown vector stacks ``W^r`` on top of ``W^i``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .exceptions import SolverError
from .network import DX, DXX, DZ, DZZ, N_PLANES, VALUE

UNCOUPLED = "uncoupled"
COUPLED = "coupled"
CONSTRAINT_BLOCKS = ("diagonal", "literal")


@dataclass(eq=False)
class LSSystem:
    D: np.ndarray
    R: np.ndarray
    layout: str
    N: int
    N_C: int
    P: int
    # per-plane PDE operator coefficients, shape (5, N); complex when coupled
    op: np.ndarray = None
    row_scale: float = 1.0
    constraint_scale: np.ndarray = None
    constraint_block: str = "diagonal"

    def __post_init__(self):
        rows, cols = self.D.shape
        if self.layout == UNCOUPLED:
            expect = (self.N + self.N_C, self.P, 2)
        else:
            nc = 2 * self.N_C if self.constraint_block == "diagonal" else self.N_C
            expect = (2 * self.N + nc, 2 * self.P, 1)
        if (rows, cols, self.R.shape[1]) != expect or self.R.shape[0] != rows:
            raise ValueError(f"LS system shape {self.D.shape}/{self.R.shape} "
                             f"does not match layout {self.layout}")

    def to_columns(self, W):
        """Map ``P x 2`` output weights onto this system's unknown layout."""
        W = np.asarray(W, dtype=float)
        if self.layout == COUPLED and W.shape == (self.P, 2):
            return np.concatenate([W[:, 0], W[:, 1]])[:, None]
        return W

    def to_weights(self, w):
        """Inverse of :meth:`to_columns`; always returns ``P x 2``."""
        if self.layout == COUPLED:
            w = np.asarray(w).reshape(-1)
            return np.stack([w[:self.P], w[self.P:]], axis=1)
        return np.asarray(w)

    def pullback(self, grad_D):
        """Gradient of a scalar w.r.t. the collocation H-jet and constraint H.

        Returns ``(g_jet, g_Hc)`` with shapes ``(5, N, P)`` and ``(N_C, P)``.
        """
        N, Nc, P = self.N, self.N_C, self.P
        s = self.row_scale
        cs = self.constraint_scale[:, None]
        if self.layout == UNCOUPLED:
            gA = s * grad_D[:N]
            g_jet = self.op.real[:, :, None] * gA[None]
            g_Hc = cs * grad_D[N:]
            return g_jet, g_Hc
        top, bot = grad_D[:N], grad_D[N:2 * N]
        g_Dr = top[:, :P] + bot[:, P:]
        g_Di = top[:, P:] - bot[:, :P]
        # D^r = s Re(op) H, D^i = -s Im(op) H
        g_jet = s * (self.op.real[:, :, None] * g_Dr[None]
                     - self.op.imag[:, :, None] * g_Di[None])
        gc = grad_D[2 * N:]
        if self.constraint_block == "diagonal":
            g_DC = gc[:Nc, :P] + gc[Nc:, P:]
        else:
            g_DC = gc[:, :P] + gc[:, P:]
        return g_jet, cs * g_DC


@dataclass(frozen=True)
class EpsilonSchedule:
    eps_start: float = 0.1
    eps_end: float = 1e-4
    decay_epochs: int = 1000

    def __post_init__(self):
        if not (self.eps_start >= self.eps_end > 0):
            raise ValueError("need eps_start >= eps_end > 0")
        if self.decay_epochs < 0:
            raise ValueError("decay_epochs must be non-negative")


def epsilon_value(sched, epoch):
    """Geometric decay from ``eps_start`` to ``eps_end`` over ``decay_epochs``."""
    if sched.decay_epochs == 0:
        return sched.eps_end
    frac = min(max(epoch, 0), sched.decay_epochs) / sched.decay_epochs
    return sched.eps_start * (sched.eps_end / sched.eps_start) ** frac


def gamma_weights(points, src, v0):
    """Constraint weights ``sqrt(max(0, (lambda/4)^2 - r^2))``."""
    lam = src.wavelength(v0)
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    r2 = (p[:, 0] - src.xs) ** 2 + (p[:, 1] - src.zs) ** 2
    return np.sqrt(np.maximum(0.0, (lam / 4.0) ** 2 - r2))


def _check_batch(H_jet, Hc, gamma):
    if H_jet.shape[0] != N_PLANES or H_jet.shape[1] == 0:
        raise ValueError("need a non-empty collocation jet with 5 planes")
    if Hc.shape[0] != gamma.shape[0] or Hc.shape[1] != H_jet.shape[2]:
        raise ValueError("constraint features and gamma are inconsistent")


def assemble_no_pml(H_jet, m, dm, u0, Hc, gamma, beta, omega):
    """Uncoupled system for the PDE without absorbing layer.

    ``m`` is the squared slowness ``1/v^2`` at the collocation points, ``dm``
    its perturbation and ``u0`` the complex background field there.
    """
    H_jet = np.asarray(H_jet, dtype=float)
    Hc = np.asarray(Hc, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_batch(H_jet, Hc, gamma)
    N, P = H_jet.shape[1:]
    Nc = Hc.shape[0]
    s = 1.0 / np.sqrt(N)
    w2 = omega ** 2
    op = np.zeros((N_PLANES, N))
    op[VALUE] = w2 * m
    op[DXX] = 1.0
    op[DZZ] = 1.0
    D_pde = s * (op[VALUE][:, None] * H_jet[VALUE] + H_jet[DXX] + H_jet[DZZ])
    src = -w2 * dm * u0
    R_pde = s * np.stack([src.real, src.imag], axis=1)
    cscale = np.sqrt(beta / Nc) * gamma
    D_c = cscale[:, None] * Hc
    D = np.vstack([D_pde, D_c])
    R = np.vstack([R_pde, np.zeros((Nc, 2))])
    return LSSystem(D, R, UNCOUPLED, N, Nc, P, op=op, row_scale=s,
                    constraint_scale=cscale)


def pml_operator(stretch, m, omega):
    """Complex per-plane coefficients of the stretched Helmholtz operator."""
    N = np.asarray(m).shape[0]
    op = np.zeros((N_PLANES, N), dtype=complex)
    op[VALUE] = stretch.e3 * omega ** 2 * m
    op[DX] = stretch.de1_dx
    op[DZ] = stretch.de2_dz
    op[DXX] = stretch.e1
    op[DZZ] = stretch.e2
    return op


def assemble_pml(H_jet, stretch, m, dm, u0, Hc, gamma, beta, omega,
                 constraint_block="diagonal"):
    """Coupled real system for the PDE with complex coordinate stretching.

    ``constraint_block="diagonal"`` penalizes ``|u_s| gamma`` with the block
    ``[[D_C, 0], [0, D_C]]``; ``"literal"`` uses the single row block
    ``[D_C, D_C]``, which penalizes ``(u_s^r + u_s^i) gamma`` instead.
    """
    if constraint_block not in CONSTRAINT_BLOCKS:
        raise ValueError(f"constraint_block must be one of {CONSTRAINT_BLOCKS}")
    H_jet = np.asarray(H_jet, dtype=float)
    Hc = np.asarray(Hc, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_batch(H_jet, Hc, gamma)
    N, P = H_jet.shape[1:]
    Nc = Hc.shape[0]
    s = 1.0 / np.sqrt(N)
    op = pml_operator(stretch, m, omega)
    A = np.einsum("pn,pnk->nk", op, H_jet)
    D_r = s * A.real
    D_i = -s * A.imag
    src = -stretch.e3 * omega ** 2 * dm * u0
    R1 = s * src.real
    R2 = s * src.imag
    cscale = np.sqrt(beta / Nc) * gamma
    D_c = cscale[:, None] * Hc
    if constraint_block == "diagonal":
        zero = np.zeros_like(D_c)
        C = np.block([[D_c, zero], [zero, D_c]])
    else:
        C = np.hstack([D_c, D_c])
    D = np.vstack([np.hstack([D_r, D_i]), np.hstack([-D_i, D_r]), C])
    R = np.concatenate([R1, R2, np.zeros(C.shape[0])])[:, None]
    return LSSystem(D, R, COUPLED, N, Nc, P, op=op, row_scale=s,
                    constraint_scale=cscale, constraint_block=constraint_block)


@dataclass(eq=False)
class LSSolution:
    """Damped LS solution; ``factor`` is the lower Cholesky factor of
    ``D^T D + eps I``, kept for the adjoint solve."""

    W: np.ndarray
    columns: np.ndarray
    factor: np.ndarray
    eps: float

    def solve(self, B):
        return cho_solve((self.factor, True), B, check_finite=False)


def normal_matrix(D, eps):
    M = D.T @ D
    M = 0.5 * (M + M.T)
    M[np.diag_indices_from(M)] += eps
    return M


def cholesky(M):
    """Lower Cholesky factor; raises :class:`SolverError` with the pivot index."""
    L, info = dpotrf(M, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise SolverError(f"Cholesky factorization failed at pivot {info - 1}",
                          pivot=info - 1)
    if info < 0:
        raise SolverError(f"invalid argument {-info} passed to dpotrf")
    return L


def solve_damped(sys, eps):
    """``W* = (D^T D + eps I)^{-1} D^T R`` via Cholesky."""
    if not eps > 0:
        raise ValueError("damping eps must be positive")
    M = normal_matrix(sys.D, eps)
    L = cholesky(M)
    rhs = sys.D.T @ sys.R
    cols = cho_solve((L, True), rhs, check_finite=False)
    if not np.all(np.isfinite(cols)):
        raise SolverError("non-finite output weights from the damped solve")
    return LSSolution(sys.to_weights(cols), cols, L, eps)


def ls_loss(sys, W):
    """Sum of squared residuals ``||D W - R||^2``."""
    res = sys.D @ sys.to_columns(W) - sys.R
    return float(np.sum(res * res))


def solve_adjoint(sys, sol, G):
    """Adjoint of ``W*(D, R)`` at fixed ``eps``.

    ``G`` is the gradient of a downstream scalar w.r.t. ``W*`` in the
    system's column layout. Returns ``(grad_D, grad_R)``.
    """
    if sol.factor is None:
        raise ValueError("solution carries no Cholesky factor")
    G = np.asarray(G, dtype=float).reshape(sol.columns.shape)
    S = sol.solve(G)
    W = sol.columns
    grad_R = sys.D @ S
    grad_D = sys.R @ S.T - sys.D @ (S @ W.T + W @ S.T)
    return grad_D, grad_R


def lsgd_loss_and_grad(sys, eps):
    """LS-embedded loss ``||D W*(D, R) - R||^2`` and its total gradient in ``D``."""
    sol = solve_damped(sys, eps)
    res = sys.D @ sol.columns - sys.R
    loss = float(np.sum(res * res))
    grad_D = 2.0 * res @ sol.columns.T
    G = 2.0 * sys.D.T @ res
    adj_D, _ = solve_adjoint(sys, sol, G)
    return loss, sol, grad_D + adj_D
