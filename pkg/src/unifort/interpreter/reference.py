"""Independent numpy implementation of the weather corpus time loop.

Arrays are logical (x, y, z) with an offset of one on x and y, so index
``[i, j, k-1]`` corresponds to Fortran ``energy(i, j, k)`` with bounds
(0:nx+1, 0:ny+1, 1:nz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SURFACE_ENERGY = 330.0
PBL_ENERGY = 200.0
INITIAL_ENERGY = 300.0
RADIATION = 0.1
TRANSFER_VELOCITY = 0.01


@dataclass
class WeatherSetup:
    nx: int = 16
    ny: int = 16
    nz: int = 8
    steps: int = 10
    diffusion_velocity: float = 0.1

    def __post_init__(self):
        if self.nz < 2:
            raise ValueError("nz must be at least 2")
        if min(self.nx, self.ny) < 1 or self.steps < 0:
            raise ValueError("grid sizes must be positive and steps non-negative")

    @property
    def shape(self) -> tuple:
        return (self.nx + 2, self.ny + 2, self.nz)

    @property
    def lower(self) -> tuple:
        return (0, 0, 1)


def _block(n: int, offset: int, size: int) -> np.ndarray:
    """Mask for the centred block n//4+1 .. 3n//4 along one axis."""
    idx = np.arange(size) + offset
    return (idx >= n // 4 + 1) & (idx <= 3 * n // 4)


def initial_energy(setup: WeatherSetup) -> np.ndarray:
    mx = _block(setup.nx, 0, setup.nx + 2)
    my = _block(setup.ny, 0, setup.ny + 2)
    mz = _block(setup.nz, 1, setup.nz)
    mask = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
    return np.where(mask, INITIAL_ENERGY, 0.0)


def boundary_fields(setup: WeatherSetup) -> tuple:
    shape = (setup.nx + 2, setup.ny + 2)
    return np.full(shape, SURFACE_ENERGY), np.full(shape, PBL_ENERGY)


def physics(e: np.ndarray, surf: np.ndarray, pbl: np.ndarray) -> None:
    e += RADIATION
    t = TRANSFER_VELOCITY * (e[:, :, 0] - surf)
    e[:, :, 0] = e[:, :, 0] - t
    t = TRANSFER_VELOCITY * (e[:, :, -1] - pbl)
    e[:, :, -1] = e[:, :, -1] - t


def diffuse(e: np.ndarray, out: np.ndarray, dv: float) -> None:
    nx, ny = e.shape[0] - 2, e.shape[1] - 2
    c = e[1:nx + 1, 1:ny + 1]
    # interior columns, inner levels
    out[1:nx + 1, 1:ny + 1, 1:-1] = c[:, :, 1:-1] * (1.0 - 6 * dv) + dv * (
        e[0:nx, 1:ny + 1, 1:-1] + e[2:nx + 2, 1:ny + 1, 1:-1]
        + e[1:nx + 1, 0:ny, 1:-1] + e[1:nx + 1, 2:ny + 2, 1:-1]
        + c[:, :, 0:-2] + c[:, :, 2:])
    # bottom and top levels
    for k, kn in ((0, 1), (-1, -2)):
        out[1:nx + 1, 1:ny + 1, k] = (1.0 - 5 * dv) * c[:, :, k] + dv * (
            e[0:nx, 1:ny + 1, k] + e[2:nx + 2, 1:ny + 1, k]
            + e[1:nx + 1, 0:ny, k] + e[1:nx + 1, 2:ny + 2, k]
            + c[:, :, kn])
    # cyclic in j
    out[:, 0, :] = (1.0 - 2 * dv) * e[:, 0, :] + dv * (e[:, 1, :] + e[:, ny + 1, :])
    out[:, ny + 1, :] = (1.0 - 2 * dv) * e[:, ny + 1, :] + dv * (e[:, ny, :] + e[:, 0, :])
    # cyclic in i
    out[0, :, :] = (1.0 - 2 * dv) * e[0, :, :] + dv * (e[1, :, :] + e[nx + 1, :, :])
    out[nx + 1, :, :] = (1.0 - 2 * dv) * e[nx + 1, :, :] + dv * (e[nx, :, :] + e[0, :, :])


def run_reference(setup: WeatherSetup) -> np.ndarray:
    """Energy after ``setup.steps`` iterations, logical (x, y, z) layout."""
    e = initial_energy(setup)
    u = np.zeros_like(e)
    surf, pbl = boundary_fields(setup)
    for _ in range(setup.steps):
        physics(e, surf, pbl)
        diffuse(e, u, setup.diffusion_velocity)
        e, u = u, e
    return e
