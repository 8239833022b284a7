"""Bessel functions of the first and second kind (orders 0 and 1) and the
Hankel function H0^(2).

Power series are used below ``SERIES_CUTOFF`` and the Hankel asymptotic
expansion above it. Both branches are vectorized over numpy arrays.
"""

import math

import numpy as np

from .exceptions import DomainError

SERIES_CUTOFF = 12.0
_SERIES_TERMS = 40
_ASYMPTOTIC_TERMS = 24
_EULER_GAMMA = 0.57721566490153286061


def _digamma_int(n):
    # psi(n) for positive integer n
    return -_EULER_GAMMA + sum(1.0 / k for k in range(1, n))


def _series_coefficients(nu):
    # c_k = (-1)^k / (k! (k+nu)!), psi terms for the Y series
    c = np.array([(-1.0) ** k / (math.factorial(k) * math.factorial(k + nu))
                  for k in range(_SERIES_TERMS)])
    psi = np.array([_digamma_int(k + 1) + _digamma_int(k + nu + 1)
                    for k in range(_SERIES_TERMS)])
    return c, psi


_SERIES = {0: _series_coefficients(0), 1: _series_coefficients(1)}


def _asymptotic_coefficients(nu):
    mu = 4.0 * nu * nu
    a = [1.0]
    for k in range(1, _ASYMPTOTIC_TERMS):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(a)


_ASYM = {0: _asymptotic_coefficients(0), 1: _asymptotic_coefficients(1)}


def _series(nu, t):
    c, psi = _SERIES[nu]
    half = 0.5 * t
    q = half * half
    j = np.zeros_like(t)
    s = np.zeros_like(t)
    power = np.ones_like(t)
    for k in range(_SERIES_TERMS):
        j += c[k] * power
        s += c[k] * psi[k] * power
        power = power * q
    scale = half ** nu
    j = j * scale
    y = (2.0 / np.pi) * np.log(half) * j - scale * s / np.pi
    if nu == 1:
        y -= 2.0 / (np.pi * t)
    return j, y


def _asymptotic(nu, t):
    a = _ASYM[nu]
    inv = 1.0 / t
    p = np.zeros_like(t)
    q = np.zeros_like(t)
    power = np.ones_like(t)
    last = np.full_like(t, np.inf)
    alive = np.ones(t.shape, dtype=bool)
    for k in range(_ASYMPTOTIC_TERMS):
        term = a[k] * power
        # stop each point at its smallest term (optimal truncation)
        alive &= np.abs(term) < last
        last = np.where(alive, np.abs(term), last)
        sign = (-1.0) ** (k // 2)
        if k % 2 == 0:
            p += np.where(alive, sign * term, 0.0)
        else:
            q += np.where(alive, sign * term, 0.0)
        power = power * inv
    chi = t - (0.5 * nu + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * t))
    j = amp * (p * np.cos(chi) - q * np.sin(chi))
    y = amp * (p * np.sin(chi) + q * np.cos(chi))
    return j, y


def _bessel(nu, t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Bessel functions of the second kind need t > 0")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    j = np.empty_like(t)
    y = np.empty_like(t)
    small = t < SERIES_CUTOFF
    if small.any():
        j[small], y[small] = _series(nu, t[small])
    if (~small).any():
        j[~small], y[~small] = _asymptotic(nu, t[~small])
    if scalar:
        return j[0], y[0]
    return j, y


def bessel_jy0(t):
    """Return ``(J0(t), Y0(t))`` for ``t > 0``."""
    return _bessel(0, t)


def bessel_jy1(t):
    """Return ``(J1(t), Y1(t))`` for ``t > 0``."""
    return _bessel(1, t)


def hankel_h0_2(t):
    """Zero-order Hankel function of the second kind, ``J0(t) - i Y0(t)``.

    Parameters
    ----------
    t : float or ndarray
        Strictly positive argument.

    Returns
    -------
    complex or ndarray of complex

    Raises
    ------
    DomainError
        If any ``t <= 0``; ``Y0`` has a logarithmic singularity at the origin.
    """
    j, y = bessel_jy0(t)
    return j - 1j * y
