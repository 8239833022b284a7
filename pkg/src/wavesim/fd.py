"""Finite-difference frequency-domain reference solver.

Second-order five-point discretization of the stretched Helmholtz equation in
flux form, with ``e1``/``e2`` sampled at half nodes and homogeneous Dirichlet
nodes on the outer boundary.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigError, DomainError, SolverError
from .medium import (Domain, background_wavefield, damping_coefficient,
                     sample_velocity, slowness_perturbation, stretch_factors)

MIN_POINTS_PER_WAVELENGTH = 10.0
RESIDUAL_TOL = 1e-10


@dataclass(eq=False)
class ComplexField:
    """Complex field on a regular grid; ``values[ix, iz]``."""

    values: np.ndarray
    dx: float
    dz: float
    x0: float = 0.0
    z0: float = 0.0

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

    def points(self):
        """Node coordinates as an ``(nx*nz, 2)`` array in ``values`` order."""
        X, Z = np.meshgrid(self.x_coords, self.z_coords, indexing="ij")
        return np.stack([X.ravel(), Z.ravel()], axis=1)

    def same_grid(self, other, rtol=1e-9):
        return (self.values.shape == other.values.shape
                and np.allclose([self.dx, self.dz, self.x0, self.z0],
                                [other.dx, other.dz, other.x0, other.z0],
                                rtol=rtol, atol=rtol * max(self.dx, self.dz)))

    def interior_mask(self, d):
        tol = 1e-6 * min(self.dx, self.dz)
        x, z = self.x_coords, self.z_coords
        mx = (x >= d.x_bl - tol) & (x <= d.x_br + tol)
        mz = (z >= d.z_bu - tol) & (z <= d.z_bd + tol)
        return mx[:, None] & mz[None, :]

    def crop(self, d):
        """Sub-field of nodes inside the interior box of ``d``."""
        mask = self.interior_mask(d)
        ix = np.flatnonzero(mask.any(axis=1))
        iz = np.flatnonzero(mask.any(axis=0))
        if ix.size == 0 or iz.size == 0:
            raise ValueError("field does not overlap the interior box")
        return ComplexField(self.values[ix[0]:ix[-1] + 1, iz[0]:iz[-1] + 1],
                            self.dx, self.dz, self.x_coords[ix[0]],
                            self.z_coords[iz[0]])


@dataclass(frozen=True)
class FDGrid:
    nx: int
    nz: int
    dx: float
    dz: float
    x0: float
    z0: float
    refine: int = 1

    @classmethod
    def for_domain(cls, d, spacing, refine=1):
        """Node-aligned grid over the outer box with ``spacing / refine`` steps.

        The interior box must span a whole number of output cells and the
        collar a whole number of fine cells.
        """
        if refine < 1:
            raise ConfigError("refinement factor must be >= 1")
        h = spacing / refine

        def count(lo, hi, step):
            n = (hi - lo) / step
            if abs(n - round(n)) > 1e-6:
                raise ConfigError(f"extent {hi - lo} is not a multiple of {step}")
            return int(round(n)) + 1

        count(d.x_bl, d.x_br, spacing)
        count(d.z_bu, d.z_bd, spacing)
        count(d.x_min, d.x_bl, h)
        count(d.z_min, d.z_bu, h)
        return cls(count(d.x_min, d.x_max, h), count(d.z_min, d.z_max, h),
                   h, h, d.x_min, d.z_min, int(refine))

    def check_resolution(self, v_min, frequency_hz):
        ppw = v_min / frequency_hz / max(self.dx, self.dz)
        if ppw < MIN_POINTS_PER_WAVELENGTH:
            raise ConfigError(f"grid too coarse: {ppw:.2f} points per minimum "
                              f"wavelength, need >= {MIN_POINTS_PER_WAVELENGTH:g}")
        return ppw

    def node_points(self, ix, iz):
        return np.stack([self.x0 + ix * self.dx, self.z0 + iz * self.dz], axis=-1)


@dataclass(eq=False)
class SparseSystem:
    A: sp.csr_matrix
    b: np.ndarray
    grid: FDGrid


def _stretch_at(points, d, c):
    if c == 0.0:
        one = np.ones(len(points), dtype=complex)
        return one, one, one
    l_x = np.maximum(0.0, d.x_bl - points[:, 0]) + np.maximum(0.0, points[:, 0] - d.x_br)
    l_z = np.maximum(0.0, d.z_bu - points[:, 1]) + np.maximum(0.0, points[:, 1] - d.z_bd)
    return stretch_factors(l_x, l_z, c)


def assemble_fd(model, src, d, pml, grid, v0=None, total_field=False):
    """Assemble the sparse system on the unknown (non-boundary) nodes.

    With ``total_field`` the right-hand side is a unit point source
    ``1/(dx dz)`` at the node nearest the source and ``m`` is the full
    squared slowness, so the solution approximates ``(i/4) H0^(2)``.
    """
    ix = np.arange(1, grid.nx - 1)
    iz = np.arange(1, grid.nz - 1)
    IX, IZ = np.meshgrid(ix, iz, indexing="ij")
    IX, IZ = IX.ravel(), IZ.ravel()
    nxu, nzu = grid.nx - 2, grid.nz - 2
    if nxu < 1 or nzu < 1:
        raise ConfigError("FD grid has no interior unknowns")
    pts = grid.node_points(IX, IZ)
    v = sample_velocity(model, pts)
    grid.check_resolution(min(v.min(), model.values.min()), src.frequency_hz)
    if v0 is None:
        v0 = float(sample_velocity(model, src.position)[0])
    m, dm = slowness_perturbation(v, v0)
    omega = src.omega
    c = damping_coefficient(pml, omega) if pml.enabled else 0.0

    hx = 0.5 * grid.dx
    hz = 0.5 * grid.dz
    e1_minus = _stretch_at(pts - [hx, 0.0], d, c)[0]
    e1_plus = _stretch_at(pts + [hx, 0.0], d, c)[0]
    e2_minus = _stretch_at(pts - [0.0, hz], d, c)[1]
    e2_plus = _stretch_at(pts + [0.0, hz], d, c)[1]
    e3 = _stretch_at(pts, d, c)[2]

    idx = (IX - 1) * nzu + (IZ - 1)
    ax = 1.0 / grid.dx ** 2
    az = 1.0 / grid.dz ** 2
    diag = -(e1_minus + e1_plus) * ax - (e2_minus + e2_plus) * az + e3 * omega ** 2 * m
    rows = [idx]
    cols = [idx]
    vals = [diag]
    for coeff, jx, jz in ((e1_minus * ax, IX - 1, IZ), (e1_plus * ax, IX + 1, IZ),
                          (e2_minus * az, IX, IZ - 1), (e2_plus * az, IX, IZ + 1)):
        keep = (jx >= 1) & (jx <= grid.nx - 2) & (jz >= 1) & (jz <= grid.nz - 2)
        rows.append(idx[keep])
        cols.append(((jx - 1) * nzu + (jz - 1))[keep])
        vals.append(coeff[keep])
    n = nxu * nzu
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))

    b = np.zeros(n, dtype=complex)
    if total_field:
        kx = int(round((src.xs - grid.x0) / grid.dx))
        kz = int(round((src.zs - grid.z0) / grid.dz))
        if not (1 <= kx <= grid.nx - 2 and 1 <= kz <= grid.nz - 2):
            raise DomainError("source is not on an unknown node")
        b[(kx - 1) * nzu + (kz - 1)] = 1.0 / (grid.dx * grid.dz)
    else:
        scat = dm != 0
        if scat.any():
            u0 = background_wavefield(pts[scat], src, v0, d, pml)
            b[scat] = -e3[scat] * omega ** 2 * dm[scat] * u0
    return SparseSystem(A, b, grid)


def solve_fd(system):
    """Direct sparse LU solve; returns the field on the full grid."""
    g = system.grid
    if not np.any(system.b):
        u = np.zeros_like(system.b)
    else:
        try:
            lu = spla.splu(system.A.tocsc())
        except RuntimeError as err:
            raise SolverError(f"sparse factorization failed: {err}") from err
        u = lu.solve(system.b)
        res = np.linalg.norm(system.A @ u - system.b) / np.linalg.norm(system.b)
        if not np.isfinite(res) or res > RESIDUAL_TOL:
            # one step of iterative refinement before giving up
            u = u + lu.solve(system.b - system.A @ u)
            res = np.linalg.norm(system.A @ u - system.b) / np.linalg.norm(system.b)
            if not np.isfinite(res) or res > RESIDUAL_TOL:
                raise SolverError(f"FD residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    full = np.zeros((g.nx, g.nz), dtype=complex)
    full[1:-1, 1:-1] = u.reshape(g.nx - 2, g.nz - 2)
    return ComplexField(full, g.dx, g.dz, g.x0, g.z0)


def residual_norm(system, field):
    u = field.values[1:-1, 1:-1].ravel()
    nb = np.linalg.norm(system.b)
    r = np.linalg.norm(system.A @ u - system.b)
    return float(r / nb) if nb else float(r)


def restrict(field, factor):
    """Keep every ``factor``-th node along both axes (no averaging)."""
    factor = int(factor)
    if factor < 1 or (field.nx - 1) % factor or (field.nz - 1) % factor:
        raise ValueError(f"factor {factor} does not align with a "
                         f"{field.nx}x{field.nz} grid")
    return ComplexField(field.values[::factor, ::factor], field.dx * factor,
                        field.dz * factor, field.x0, field.z0)


def fd_reference(problem, fd_pml, spacing, refine=4, total_field=False):
    """Scattered (or total) field on the interior output grid.

    The solve runs on a grid ``refine`` times finer than ``spacing`` over the
    interior box padded with the solver's own absorbing collar ``fd_pml``.
    Returns ``(field, residual)``.
    """
    inner = problem.domain.interior
    d = Domain.from_interior(inner.x_bl, inner.x_br, inner.z_bu, inner.z_bd,
                             fd_pml.L_pml if fd_pml.enabled else 0.0)
    grid = FDGrid.for_domain(d, spacing, refine)
    system = assemble_fd(problem.model, problem.source, d, fd_pml, grid,
                         v0=problem.v0, total_field=total_field)
    fine = solve_fd(system)
    res = residual_norm(system, fine)
    return restrict(fine.crop(d), refine), res
