"""Physical setting: geometry, velocity rasters, PML stretching and the
analytic background wavefield.

All functions are unit-agnostic; they only require a consistent length unit
(meters throughout the public API, kilometers inside the trainer after
:meth:`HelmholtzProblem.scaled`).
"""

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigError, DomainError
from .special import hankel_h0_2


@dataclass(frozen=True)
class Domain:
    """Interior box ``[x_bl, x_br] x [z_bu, z_bd]`` plus the outer extents.

    ``z`` grows downward (depth), so ``z_bu`` is the upper boundary.
    """

    x_bl: float
    x_br: float
    z_bu: float
    z_bd: float
    x_min: float
    x_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_bl < self.x_br <= self.x_max):
            raise ConfigError(f"inconsistent x extents: {self}")
        if not (self.z_min <= self.z_bu < self.z_bd <= self.z_max):
            raise ConfigError(f"inconsistent z extents: {self}")

    @classmethod
    def from_interior(cls, x_bl, x_br, z_bu, z_bd, pml_thickness=0.0):
        t = float(pml_thickness)
        return cls(x_bl, x_br, z_bu, z_bd,
                   x_bl - t, x_br + t, z_bu - t, z_bd + t)

    @property
    def interior(self):
        """The same box with the PML collar removed."""
        return Domain.from_interior(self.x_bl, self.x_br, self.z_bu, self.z_bd)

    def contains(self, points, interior=False, atol=0.0):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        d = self.interior if interior else self
        return ((p[:, 0] >= d.x_min - atol) & (p[:, 0] <= d.x_max + atol)
                & (p[:, 1] >= d.z_min - atol) & (p[:, 1] <= d.z_max + atol))

    def scaled(self, factor):
        return Domain(*(v * factor for v in (
            self.x_bl, self.x_br, self.z_bu, self.z_bd,
            self.x_min, self.x_max, self.z_min, self.z_max)))


@dataclass(frozen=True)
class PMLSpec:
    """Absorbing layer settings. ``omega0=None`` means "use the run's omega"."""

    L_pml: float = 0.0
    a0: float = 0.8
    omega0: float | None = None
    enabled: bool = False

    def __post_init__(self):
        if self.enabled and not self.L_pml > 0:
            raise ConfigError("PML thickness must be positive when enabled")
        if self.a0 < 0:
            raise ConfigError("PML scaling constant a0 must be non-negative")

    def scaled(self, factor):
        return replace(self, L_pml=self.L_pml * factor)


@dataclass(frozen=True)
class SourceSpec:
    xs: float
    zs: float
    frequency_hz: float

    def __post_init__(self):
        if not self.frequency_hz > 0:
            raise ConfigError("source frequency must be positive")

    @property
    def omega(self):
        return 2.0 * np.pi * self.frequency_hz

    @property
    def position(self):
        return np.array([self.xs, self.zs])

    def wavelength(self, v0):
        return v0 / self.frequency_hz

    def scaled(self, factor):
        return replace(self, xs=self.xs * factor, zs=self.zs * factor)


@dataclass(frozen=True, eq=False)
class VelocityModel:
    """Velocity raster; ``values[ix, iz]`` sits at ``(x0 + ix*dx, z0 + iz*dz)``."""

    values: np.ndarray
    dx: float
    dz: float
    x0: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ConfigError("velocity raster must be a non-empty 2-D array")
        if not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise ConfigError("velocities must be finite and positive")
        if not (self.dx > 0 and self.dz > 0):
            raise ConfigError("raster spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def nx(self):
        return self.values.shape[0]

    @property
    def nz(self):
        return self.values.shape[1]

    @property
    def x_coords(self):
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def z_coords(self):
        return self.z0 + self.dz * np.arange(self.nz)

    def scaled(self, factor):
        # lengths and velocities scale together; slowness scales inversely
        return VelocityModel(self.values * factor, self.dx * factor,
                             self.dz * factor, self.x0 * factor,
                             self.z0 * factor)


@dataclass(frozen=True, eq=False)
class StretchState:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    de1_dx: np.ndarray
    de2_dz: np.ndarray
    l_x: np.ndarray
    l_z: np.ndarray


def _as_points(p):
    p = np.asarray(p, dtype=float)
    return p.reshape(-1, 2)


def _check_inside(p, d):
    # tolerance absorbs round-off from unit rescaling
    tol = 1e-9 * max(d.x_max - d.x_min, d.z_max - d.z_min)
    if not np.all(d.contains(p, atol=tol)):
        raise DomainError("point outside the outer domain extents")


def boundary_distances(points, d):
    """Distances ``(l_x, l_z)`` from each point to the interior box."""
    p = _as_points(points)
    _check_inside(p, d)
    x, z = p[:, 0], p[:, 1]
    l_x = np.maximum(0.0, d.x_bl - x) + np.maximum(0.0, x - d.x_br)
    l_z = np.maximum(0.0, d.z_bu - z) + np.maximum(0.0, z - d.z_bd)
    return l_x, l_z


def _boundary_slopes(p, d):
    x, z = p[:, 0], p[:, 1]
    sx = np.where(x < d.x_bl, -1.0, np.where(x > d.x_br, 1.0, 0.0))
    sz = np.where(z < d.z_bu, -1.0, np.where(z > d.z_bd, 1.0, 0.0))
    return sx, sz


def damping_coefficient(pml, omega):
    """``c = a0 * omega0 / (omega * L_pml**2)``; ``omega0`` defaults to ``omega``."""
    if not pml.L_pml > 0:
        raise ConfigError("damping coefficient needs a positive PML thickness")
    if not omega > 0:
        raise ConfigError("angular frequency must be positive")
    omega0 = omega if pml.omega0 is None else pml.omega0
    return pml.a0 * omega0 / (omega * pml.L_pml ** 2)


def stretch_factors(l_x, l_z, c):
    """Complex stretching factors ``(e1, e2, e3)`` from boundary distances.

    With ``s_x = 1 - i c l_x**2`` and ``s_z = 1 - i c l_z**2`` these are
    ``s_z/s_x``, ``s_x/s_z`` and ``s_x*s_z``, written out in real form.
    """
    l_x = np.asarray(l_x, dtype=float)
    l_z = np.asarray(l_z, dtype=float)
    x2, z2 = l_x ** 2, l_z ** 2
    num_r = 1.0 + c * c * x2 * z2
    den_x = 1.0 + c * c * x2 * x2
    den_z = 1.0 + c * c * z2 * z2
    e1 = num_r / den_x + 1j * c * (x2 - z2) / den_x
    e2 = num_r / den_z + 1j * c * (z2 - x2) / den_z
    e3 = 1.0 - c * c * x2 * z2 - 1j * c * (x2 + z2)
    return e1, e2, e3


def stretching_state(points, d, c):
    """Stretching factors and their gradients ``de1/dx``, ``de2/dz``."""
    p = _as_points(points)
    l_x, l_z = boundary_distances(p, d)
    sx, sz = _boundary_slopes(p, d)
    e1, e2, e3 = stretch_factors(l_x, l_z, c)
    s_x = 1.0 - 1j * c * l_x ** 2
    s_z = 1.0 - 1j * c * l_z ** 2
    # d(s_z/s_x)/dx = s_z * (2 i c l_x l_x') / s_x**2, likewise for e2
    de1_dx = s_z * (2j * c * l_x * sx) / s_x ** 2
    de2_dz = s_x * (2j * c * l_z * sz) / s_z ** 2
    return StretchState(e1, e2, e3, de1_dx, de2_dz, l_x, l_z)


def sample_velocity(model, points):
    """Bilinear interpolation of the raster, edge-clamped outside it."""
    p = _as_points(points)
    fx = np.clip((p[:, 0] - model.x0) / model.dx, 0.0, model.nx - 1)
    fz = np.clip((p[:, 1] - model.z0) / model.dz, 0.0, model.nz - 1)
    ix = np.minimum(np.floor(fx).astype(int), max(model.nx - 2, 0))
    iz = np.minimum(np.floor(fz).astype(int), max(model.nz - 2, 0))
    tx = fx - ix
    tz = fz - iz
    ix1 = np.minimum(ix + 1, model.nx - 1)
    iz1 = np.minimum(iz + 1, model.nz - 1)
    v = model.values
    v00, v10, v01, v11 = v[ix, iz], v[ix1, iz], v[ix, iz1], v[ix1, iz1]
    # increment form is exact on constant patches
    return (v00 + tx * (v10 - v00) + tz * (v01 - v00)
            + tx * tz * (v11 - v10 - v01 + v00))


def slowness_perturbation(v, v0):
    """Return ``(m, dm)`` with ``m = 1/v**2`` and ``dm = m - 1/v0**2``."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0) or not v0 > 0:
        raise DomainError("velocities must be positive")
    m = 1.0 / v ** 2
    return m, m - 1.0 / v0 ** 2


def background_wavefield(points, src, v0, d, pml=None):
    """Analytic background field ``(i/4) H0^(2)(omega r / v0)``.

    Inside the PML collar the Hankel kernel is multiplied by
    ``exp(-omega c (l_x**2 + l_z**2)**1.5 / (3 v0))``.
    """
    p = _as_points(points)
    r = np.hypot(p[:, 0] - src.xs, p[:, 1] - src.zs)
    if np.any(r == 0):
        raise DomainError("background wavefield is singular at the source")
    omega = src.omega
    u0 = 0.25j * hankel_h0_2(omega * r / v0)
    if pml is not None and pml.enabled:
        c = damping_coefficient(pml, omega)
        l_x, l_z = boundary_distances(p, d)
        u0 = u0 * np.exp(-omega * c * (l_x ** 2 + l_z ** 2) ** 1.5 / (3.0 * v0))
    return u0


@dataclass(frozen=True, eq=False)
class HelmholtzProblem:
    """Everything that defines one scattered-field simulation."""

    model: VelocityModel
    source: SourceSpec
    domain: Domain
    pml: PMLSpec = PMLSpec()
    v0: float | None = None

    def __post_init__(self):
        if not np.all(self.domain.contains(self.source.position, interior=True)):
            raise ConfigError("source must lie inside the interior region")
        d = self.domain
        if self.pml.enabled:
            gaps = (d.x_bl - d.x_min, d.x_max - d.x_br,
                    d.z_bu - d.z_min, d.z_max - d.z_bd)
            if not np.allclose(gaps, self.pml.L_pml, rtol=1e-9, atol=0):
                raise ConfigError("PML thickness does not match the domain collar")
        if self.v0 is None:
            v0 = float(sample_velocity(self.model, self.source.position)[0])
            object.__setattr__(self, "v0", v0)

    @property
    def omega(self):
        return self.source.omega

    @property
    def wavelength(self):
        return self.source.wavelength(self.v0)

    def scaled(self, factor):
        return HelmholtzProblem(self.model.scaled(factor),
                                self.source.scaled(factor),
                                self.domain.scaled(factor),
                                self.pml.scaled(factor),
                                self.v0 * factor)

    def damping(self):
        if not self.pml.enabled:
            return 0.0
        return damping_coefficient(self.pml, self.omega)
