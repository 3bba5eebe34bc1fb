"""Run the weather corpus through each code path and compare the results.

Every variant returns the final energy field in logical (x, y, z) order with
bounds (0:nx+1, 0:ny+1, 1:nz), so any two variants compare directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..codegen.config import BuildConfig
from ..codegen.storage import macro_names, storage_table
from ..frontend import load_program
from ..frontend.ast import Program
from ..source import RawSource
from .engine import Interpreter
from .fields import Comparison, compare_fields
from .reference import WeatherSetup, boundary_fields, initial_energy, run_reference
from .runtime import ArrayObject

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"
ORIGINAL = "simple_weather.h90"
DATA_REGION = "simple_weather_data_region.h90"
SEQUENTIAL = "simple_weather_sequential.f90"
TIMESTEP = 1.0
OUTPUT_TIMESTEP = 1.0e9
IJK = (1, 2, 3)
KIJ = (3, 1, 2)


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / name


@dataclass
class RunResult:
    energy: np.ndarray
    writes: list = field(default_factory=list)  # (name, time) per write_data call
    interpreter: Optional[Interpreter] = None


def _physical(logical: np.ndarray, lower: tuple, order: Optional[tuple]) -> ArrayObject:
    if order is None:
        return ArrayObject(np.asfortranarray(logical.copy()), lower)
    perm = [p - 1 for p in order]
    return ArrayObject(np.asfortranarray(np.transpose(logical, perm).copy()), tuple(lower[p] for p in perm))


def _logical(arr: ArrayObject, order: Optional[tuple]) -> np.ndarray:
    if order is None:
        return np.array(arr.data)
    perm = [p - 1 for p in order]
    return np.array(np.transpose(arr.data, np.argsort(perm)))


def run_program(program: Program, setup: WeatherSetup, module: Optional[str] = None, arch: str = "cpu",
                emulate_kernels: bool = False, orders: Optional[dict] = None, launch_order: str = "forward",
                seed: int = 0) -> RunResult:
    """Initialise the weather module, call simulate, return the final field.

    ``orders`` maps rank to the storage permutation used when allocating the
    module arrays; the corpus leaves allocation to its host code, so the
    harness plays that role and lays the data out as the macros expect.
    """
    orders = orders or {}
    writes = []

    def write_data(data, name, time):
        writes.append((name, time))

    interp = Interpreter(program, arch=arch, emulate_kernels=emulate_kernels, launch_order=launch_order,
                         seed=seed, hooks={"write_data": write_data})
    if module is None:
        module = next(m.name for m in program.modules if m.spec("energy") is not None)
    mod = program.module(module)
    interp.set(module, "nx", setup.nx)
    interp.set(module, "ny", setup.ny)
    interp.set(module, "nz", setup.nz)
    interp.set(module, "diffusion_velocity", setup.diffusion_velocity)

    def order_of(name, rank):
        return orders.get(rank) if mod.spec(name) is not None else None

    e_order = order_of("energy", 3)
    s_order = order_of("energy_surf", 2)
    surf, pbl = boundary_fields(setup)
    interp.set(module, "energy", _physical(initial_energy(setup), setup.lower, e_order))
    interp.set(module, "energy_u", _physical(np.zeros(setup.shape), setup.lower, order_of("energy_u", 3)))
    interp.set(module, "energy_surf", _physical(surf, (0, 0), s_order))
    interp.set(module, "energy_pbl", _physical(pbl, (0, 0), order_of("energy_pbl", 2)))
    if setup.steps > 0:
        end_time = (setup.steps - 0.5) * TIMESTEP
        interp.call("simulate", 0.0, end_time, TIMESTEP, OUTPUT_TIMESTEP)
    return RunResult(_logical(interp.get(module, "energy"), e_order), writes, interp)


def transpiled_program(target: str, build: Optional[BuildConfig] = None, source: str = ORIGINAL,
                       use_macro_text: Optional[bool] = None) -> tuple:
    """Transpile a corpus file and parse it back.

    With ``use_macro_text`` set to True/False the unexpanded output is
    preprocessed with GPU defined/undefined instead of using the expanded text.
    Returns (program, result, orders).
    """
    from ..pipeline import transpile

    result = transpile([corpus_path(source)], target, build)
    unit = result.units[0]
    config = result.config
    if use_macro_text is None:
        program = load_program([RawSource.from_text(unit.text, unit.path)])
        arch = config.architecture
    else:
        table = storage_table(config, result.generated.aliases, gpu=use_macro_text)
        path = str(Path(unit.path).with_suffix(".F90"))
        program = load_program([RawSource.from_text(unit.macro_text, path)], table=table,
                               macro_names=())
        arch = "gpu" if use_macro_text else "cpu"
    orders = {rank: config.order(arch, rank) for rank in (2, 3)}
    return program, result, orders


def cpu_build(order: tuple) -> BuildConfig:
    build = BuildConfig()
    build.storage_order[("cpu", 3)] = tuple(order)
    return build


def run_reference_variant(setup: WeatherSetup, **_) -> RunResult:
    return RunResult(run_reference(setup))


def run_original(setup: WeatherSetup, **_) -> RunResult:
    return run_program(load_program([corpus_path(ORIGINAL)]), setup, arch="cpu")


def run_sequential(setup: WeatherSetup, **_) -> RunResult:
    return run_program(load_program([corpus_path(SEQUENTIAL)]), setup)


def _run_cpu(order):
    def run(setup: WeatherSetup, **_) -> RunResult:
        program, _, orders = transpiled_program("cpu-openmp", cpu_build(order))
        return run_program(program, setup, arch="cpu", orders=orders)
    return run


def run_cuda(setup: WeatherSetup, launch_order: str = "forward", seed: int = 0, **_) -> RunResult:
    program, _, orders = transpiled_program("gpu-cuda")
    return run_program(program, setup, arch="gpu", emulate_kernels=True, orders=orders,
                       launch_order=launch_order, seed=seed)


def run_openacc(setup: WeatherSetup, source: str = ORIGINAL, **_) -> RunResult:
    program, _, orders = transpiled_program("gpu-openacc", source=source)
    return run_program(program, setup, arch="gpu", orders=orders)


def run_macro_text(setup: WeatherSetup, gpu: bool, target: str = "cpu-openmp",
                   build: Optional[BuildConfig] = None) -> RunResult:
    program, result, orders = transpiled_program(target, build, use_macro_text=gpu)
    emulate = result.config.backend == "cuda"
    return run_program(program, setup, arch=result.config.architecture, emulate_kernels=emulate, orders=orders)


VARIANTS: dict = {
    "reference": run_reference_variant,
    "original": run_original,
    "sequential": run_sequential,
    "cpu-ijk": _run_cpu(IJK),
    "cpu-kij": _run_cpu(KIJ),
    "gpu-cuda": run_cuda,
    "gpu-openacc": run_openacc,
}


VARIANT_ALIASES = {"cpu": "cpu-ijk", "gpu-emulated": "gpu-cuda", "openacc": "gpu-openacc"}


def run_variant(name: str, setup: WeatherSetup, **kw) -> RunResult:
    try:
        fn: Callable = VARIANTS[VARIANT_ALIASES.get(name, name)]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(list(VARIANTS) + list(VARIANT_ALIASES))}") from None
    return fn(setup, **kw)


def verify(setup: WeatherSetup, variants=None, tolerance: float = 1e-12, baseline: str = "reference") -> dict:
    """Compare each variant against the baseline; returns name -> Comparison."""
    variants = list(variants or [v for v in VARIANTS if v != baseline])
    base = run_variant(baseline, setup).energy
    out: dict = {}
    for name in variants:
        out[name] = compare_fields(run_variant(name, setup).energy, base, tolerance, setup.lower)
    return out


__all__ = [
    "Comparison", "IJK", "VARIANT_ALIASES", "KIJ", "RunResult", "VARIANTS", "corpus_path", "cpu_build", "run_macro_text",
    "run_cuda", "run_openacc", "run_original", "run_program", "run_sequential", "run_variant", "transpiled_program", "verify",
]
