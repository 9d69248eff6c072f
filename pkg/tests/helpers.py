"""
Surfaces and start states shared by several test modules.
"""
import math

import numpy as np

from src.scattering.geodesic import GeodesicState
from src.scattering.surfaces import Domain, TabulatedSurface, build_geometry


def henon_heiles_surface():
    """Henon-Heiles potential tabulated on a grid; the bicubic spline is exact for it."""
    grid = np.arange(-1.2, 1.2 + 1e-9, 0.05)
    x, y = np.meshgrid(grid, grid, indexing="ij")
    values = 0.5 * (x**2 + y**2) + x**2 * y - y**3 / 3.0
    return TabulatedSurface(
        Domain(-1.1, 1.1, -1.1, 1.1),
        {},
        build_geometry((0.0, 0.0), (-1.0, 0.0), (1.0, 0.0), 1.0),
        mu0=1.0,
        grid_x1=grid,
        grid_x2=grid,
        values=values,
        name="henon-heiles",
    )


def origin_state(energy, angle):
    """Unit-speed start at the origin where V = 0."""
    speed = math.sqrt(2.0 * energy)
    return GeodesicState((0.0, 0.0), (math.cos(angle) / speed, math.sin(angle) / speed))
