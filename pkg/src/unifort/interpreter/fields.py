"""Text dumps of 3D fields and their comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def dump_field(data: np.ndarray, lower=(0, 0, 1)) -> str:
    """Header ``nx ny nz l1 l2 l3`` then one ``i j k value`` line per point, k fastest."""
    nx, ny, nz = data.shape
    lines = [f"{nx} {ny} {nz} {lower[0]} {lower[1]} {lower[2]}"]
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                lines.append(f"{i + lower[0]} {j + lower[1]} {k + lower[2]} {float(data[i, j, k]):.17g}")
    return "\n".join(lines) + "\n"


def load_field(text: str) -> tuple:
    """Inverse of dump_field: returns (data, lower)."""
    rows = text.strip().splitlines()
    nx, ny, nz, l1, l2, l3 = (int(v) for v in rows[0].split())
    data = np.empty((nx, ny, nz))
    for row in rows[1:]:
        i, j, k, v = row.split()
        data[int(i) - l1, int(j) - l2, int(k) - l3] = float(v)
    return data, (l1, l2, l3)


def write_field(path, data: np.ndarray, lower=(0, 0, 1)) -> Path:
    path = Path(path)
    path.write_text(dump_field(data, lower), encoding="utf-8")
    return path


@dataclass
class Comparison:
    max_abs_diff: float
    location: tuple  # logical index of the largest difference
    nrmse: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff <= self.tolerance

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} max|diff|={self.max_abs_diff:.3e} at {self.location} "
                f"nrmse={self.nrmse:.3e} (tol {self.tolerance:g})")


def compare_fields(a: np.ndarray, b: np.ndarray, tolerance: float = 1e-12, lower=(0, 0, 1)) -> Comparison:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if np.isnan(diff).any():
        loc = tuple(int(x) for x in np.argwhere(np.isnan(diff))[0])
        return Comparison(math.inf, tuple(l + o for l, o in zip(loc, lower)), math.inf, tolerance)
    loc = np.unravel_index(int(np.argmax(diff)), diff.shape) if diff.size else (0,) * a.ndim
    span = float(np.max(b) - np.min(b)) if b.size else 0.0
    rmse = float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0
    nrmse = rmse / span if span > 0 else rmse
    return Comparison(float(diff.max()) if diff.size else 0.0, tuple(int(l) + int(o) for l, o in zip(loc, lower)),
                      nrmse, tolerance)
