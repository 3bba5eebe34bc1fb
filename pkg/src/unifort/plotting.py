"""Matplotlib charts for the performance model."""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .perfmodel import HardwareMetrics, ModelError, ModelParams, cpu_model_time, gpu_model_time

SERIES = (
    ("cpu1", "CPU single core", lambda p, m: cpu_model_time(p, m, "single")),
    ("cpu", "CPU socket", lambda p, m: cpu_model_time(p, m, "socket")),
    ("gpu", "GPU", gpu_model_time),
)


def model_curves(machine: HardwareMetrics, params: ModelParams, scales=(0.25, 0.5, 1.0, 2.0, 4.0)) -> dict:
    """Model time per target while scaling the horizontal grid (nx, ny) around ``params``.

    Targets whose metrics the machine lacks are left out.
    """
    curves = {}
    for key, label, fn in SERIES:
        points = []
        try:
            for s in scales:
                p = replace(params, nx=max(1, round(params.nx * s)), ny=max(1, round(params.ny * s)))
                points.append((p.nx * p.ny * p.nz, fn(p, machine)))
        except ModelError:
            continue
        curves[key] = (label, points)
    return curves


def plot_model(machine: HardwareMetrics, params: ModelParams, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = model_curves(machine, params)
    if not curves:
        raise ModelError(f"machine {machine.name!r} has no metrics for any model target")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, points in curves.values():
        xs, ys = zip(*points)
        ax.loglog(xs, ys, marker="o", label=label)
    ax.axvline(params.nx * params.ny * params.nz, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel("grid points")
    ax.set_ylabel(f"model time for {params.steps} steps [s]")
    ax.set_title(f"{machine.name} ({'cached' if params.cached else 'uncached'})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
