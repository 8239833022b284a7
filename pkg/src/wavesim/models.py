"""Procedural velocity rasters for desk-scale experiments."""

import numpy as np

from .medium import VelocityModel


def _coords(extent, spacing, origin):
    n = int(round(extent / spacing)) + 1
    return origin + spacing * np.arange(n)


def homogeneous(velocity, x_extent, z_extent, spacing, x0=0.0, z0=0.0):
    x = _coords(x_extent, spacing, x0)
    z = _coords(z_extent, spacing, z0)
    return VelocityModel(np.full((x.size, z.size), float(velocity)), spacing,
                         spacing, x0, z0)


def two_layer(v_top, v_bottom, interface_depth, x_extent, z_extent, spacing,
              x0=0.0, z0=0.0):
    """Flat interface at ``interface_depth``; ``v_top`` above, ``v_bottom`` below."""
    x = _coords(x_extent, spacing, x0)
    z = _coords(z_extent, spacing, z0)
    v = np.where(z[None, :] < interface_depth, v_top, v_bottom)
    return VelocityModel(np.broadcast_to(v, (x.size, z.size)).astype(float),
                         spacing, spacing, x0, z0)


def marmousi_like(x_extent, z_extent, spacing, x0=0.0, z0=0.0, v_top=1500.0,
                  v_bottom=3500.0, n_layers=7, seed=0):
    """Layered medium with dipping, undulating interfaces and a smooth lens.

    A stand-in for a Marmousi subset: velocity increases with depth,
    interfaces vary laterally, and a low-velocity lens breaks the layering.
    """
    rng = np.random.default_rng(seed)
    x = _coords(x_extent, spacing, x0)
    z = _coords(z_extent, spacing, z0)
    X, Z = np.meshgrid(x - x0, z - z0, indexing="ij")
    levels = np.linspace(v_top, v_bottom, n_layers)
    depths = np.sort(rng.uniform(0.1, 0.95, n_layers - 1)) * z_extent
    v = np.full(X.shape, levels[0])
    for k, base in enumerate(depths):
        dip = rng.uniform(-0.25, 0.25)
        amp = rng.uniform(0.02, 0.08) * z_extent
        wavelength = rng.uniform(0.5, 1.5) * x_extent
        phase = rng.uniform(0, 2 * np.pi)
        surface = (base + dip * (X - 0.5 * x_extent)
                   + amp * np.sin(2 * np.pi * X / wavelength + phase))
        v = np.where(Z >= surface, levels[k + 1], v)
    cx, cz = rng.uniform(0.3, 0.7) * x_extent, rng.uniform(0.5, 0.8) * z_extent
    rx, rz = 0.15 * x_extent, 0.08 * z_extent
    lens = np.exp(-(((X - cx) / rx) ** 2 + ((Z - cz) / rz) ** 2))
    v = v * (1.0 - 0.15 * lens)
    return VelocityModel(v, spacing, spacing, x0, z0)
