"""Input validation helpers."""

import numpy as np
from sklearn.utils import check_array

from .medium import HelmholtzProblem


def check_points(X):
    """Validate an ``(n, 2)`` array of finite ``(x, z)`` coordinates."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected (n, 2) coordinates, got shape {X.shape}")
    return X


def check_complex_target(y, n):
    """Accept a complex vector or ``(n, 2)`` real/imag columns."""
    y = np.asarray(y)
    if np.iscomplexobj(y):
        y = y.reshape(-1)
    elif y.ndim == 2 and y.shape[1] == 2:
        y = y[:, 0] + 1j * y[:, 1]
    else:
        raise ValueError("target must be complex or have (real, imag) columns")
    if y.shape[0] != n:
        raise ValueError(f"target has {y.shape[0]} entries for {n} points")
    if not np.all(np.isfinite(y)):
        raise ValueError("target contains non-finite values")
    return y


def check_problem(problem):
    if not isinstance(problem, HelmholtzProblem):
        raise TypeError(f"expected a HelmholtzProblem, got {type(problem).__name__}")
    return problem
