"""scikit-learn style estimator around the trainer."""

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_problem, check_complex_target
from .exceptions import SolverError
from .lsq import EpsilonSchedule
from .network import Architecture, encode_jet, forward_jet, init_params
from .training import (MetricsRecord, TrainConfig, lr_value, new_state,
                       relative_l2, sample_batch, train_epoch)


class ScatteredFieldPINN(BaseEstimator):
    """Coordinate network for the scattered Helmholtz field.

    ``fit`` takes a :class:`~wavesim.medium.HelmholtzProblem` (and optionally
    a reference :class:`~wavesim.fd.ComplexField` for validation); ``predict``
    maps points in meters to ``(real, imag)`` columns.

    Parameters
    ----------
    mode : {"lsgd", "gd"}
        ``"lsgd"`` solves the output layer by damped least squares in every
        step; ``"gd"`` trains it with Adam like the hidden layers.
    hidden_sizes : tuple of int
        Hidden widths; the last entry is the penultimate width ``P``.
    encoding_level : int
        Highest dyadic level ``K`` of the positional encoding.
    n_collocation, n_constraint : int
        Points per epoch in the domain and in the source disk. ``None``
        for ``n_constraint`` means ``max(64, n_collocation // 20)``.
    length_scale : float
        Factor converting meters to the network's coordinate unit
        (``1e-3``: kilometers).
    random_state : int
        Seeds both the initialization and the collocation sampling.
    """

    def __init__(self, mode="lsgd", hidden_sizes=(64, 64, 64, 64),
                 encoding_level=3, n_collocation=500, n_constraint=None,
                 beta=1.0, epochs=2000, lr_start=2e-3, lr_end=7e-4,
                 adam_beta1=0.9, adam_beta2=0.999, adam_eps=1e-8,
                 eps_start=0.1, eps_end=1e-4, eps_decay_epochs=1000,
                 constraint_block="diagonal", length_scale=1e-3,
                 validate_every=100, random_state=0, verbose=0):
        self.mode = mode
        self.hidden_sizes = hidden_sizes
        self.encoding_level = encoding_level
        self.n_collocation = n_collocation
        self.n_constraint = n_constraint
        self.beta = beta
        self.epochs = epochs
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_epochs = eps_decay_epochs
        self.constraint_block = constraint_block
        self.length_scale = length_scale
        self.validate_every = validate_every
        self.random_state = random_state
        self.verbose = verbose

    def _train_config(self, problem):
        return TrainConfig(
            mode=self.mode, pml_enabled=problem.pml.enabled,
            N=self.n_collocation, N_C=self.n_constraint, beta=self.beta,
            epochs=self.epochs, lr_start=self.lr_start, lr_end=self.lr_end,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2,
            eps_adam=self.adam_eps,
            eps_schedule=EpsilonSchedule(self.eps_start, self.eps_end,
                                         self.eps_decay_epochs),
            constraint_block=self.constraint_block, seed=self.random_state,
            validate_every=self.validate_every)

    def fit(self, problem, reference=None, metrics=None, params=None):
        """Train on ``problem``.

        ``metrics`` is an optional sink with a ``write(MetricsRecord)``
        method; ``params`` optionally warm-starts from given network weights.
        """
        check_problem(problem)
        cfg = self._train_config(problem)
        arch = Architecture(self.encoding_level, self.hidden_sizes)
        if params is None:
            params = init_params(arch, self.random_state)
        else:
            params = params.copy()
        self.problem_ = problem
        self._scaled = problem.scaled(self.length_scale)
        self.params_ = params
        self.history_ = []
        self.n_epochs_ = 0
        val_pts = val_ref = None
        if reference is not None:
            inner = reference.crop(problem.domain)
            val_pts = inner.points()
            val_ref = inner.values.ravel()
        state = new_state(params, self._scaled, cfg)
        rng = np.random.default_rng([self.random_state, 1])
        start = time.perf_counter()
        for epoch in range(cfg.epochs):
            batch = sample_batch(self._scaled, cfg, arch.K, rng)
            try:
                loss, eps = train_epoch(state, batch, epoch)
            except SolverError as err:
                if err.epoch is None:
                    err.epoch = epoch
                raise
            if not np.isfinite(loss):
                raise SolverError(f"epoch {epoch}: non-finite loss", epoch=epoch)
            self.n_epochs_ = epoch + 1
            val = None
            last = epoch == cfg.epochs - 1
            if val_pts is not None and (last or epoch % max(cfg.validate_every, 1) == 0):
                val = relative_l2(self.predict_complex(val_pts), val_ref)
            rec = MetricsRecord(epoch, loss, val, lr_value(cfg, epoch), eps,
                                time.perf_counter() - start)
            self.history_.append(rec)
            if metrics is not None:
                metrics.write(rec)
            if self.verbose and (val is not None or epoch % 100 == 0):
                print(f"epoch {epoch:6d} loss {loss:.4e}"
                      + ("" if val is None else f" val {val:.4f}"), flush=True)
        return self

    def _features(self, X):
        pts = check_points(X) * self.length_scale
        return forward_jet(self.params_, encode_jet(pts, self.params_.arch.K))[0]

    def predict(self, X):
        """Scattered field at ``X`` (meters) as ``(n, 2)`` real/imag columns."""
        check_is_fitted(self, "params_")
        return self._features(X) @ self.params_.W_out

    def predict_complex(self, X):
        u = self.predict(X)
        return u[:, 0] + 1j * u[:, 1]

    def predict_field(self, grid):
        """Evaluate on the nodes of a :class:`ComplexField`-like grid."""
        from .fd import ComplexField
        u = self.predict_complex(grid.points()).reshape(grid.nx, grid.nz)
        return ComplexField(u, grid.dx, grid.dz, grid.x0, grid.z0)

    def score(self, X, y):
        """``1 - relative L2 error`` of the prediction against ``y``."""
        y = check_complex_target(y, len(check_points(X)))
        return 1.0 - relative_l2(self.predict_complex(X), y)

    @property
    def loss_curve_(self):
        check_is_fitted(self, "history_")
        return np.array([r.loss for r in self.history_])
