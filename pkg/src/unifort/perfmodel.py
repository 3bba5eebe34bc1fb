"""Bandwidth-bounded performance model and GPU offload speedup condition.

Throughputs are in GFLOP/s, bandwidths in GB/s (1e9 bytes) and random-access
rates in GUP/s (1e9 updates), as listed in data/machines.json.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

GIGA = 1e9
METRIC_FIELDS = ("P_H1C", "P_H", "P_D", "BW_H1C", "BW_H", "BW_D", "BW_HtoD", "RA_H", "RA_D")
TARGETS = ("cpu1", "cpu", "gpu", "condition")
M_SA_CACHED = 4
M_SA_UNCACHED = 10
M_RA = 4
DEFAULT_STEPS = 100
DOUBLE_BYTES = 8


class ModelError(ValueError):
    """Invalid model input: missing metric, unknown machine, infeasible setup."""


@dataclass(frozen=True)
class HardwareMetrics:
    name: str
    P_H1C: Optional[float] = None
    P_H: Optional[float] = None
    P_D: Optional[float] = None
    BW_H1C: Optional[float] = None
    BW_H: Optional[float] = None
    BW_D: Optional[float] = None
    BW_HtoD: Optional[float] = None
    RA_H: Optional[float] = None
    RA_D: Optional[float] = None
    description: str = ""

    def __post_init__(self):
        for f in METRIC_FIELDS:
            v = getattr(self, f)
            if v is not None and not v > 0:
                raise ModelError(f"{self.name}: {f} must be positive, got {v}")

    def require(self, *names: str) -> tuple:
        values = []
        for n in names:
            v = getattr(self, n)
            if v is None:
                table = _TABLE_CACHE or load_machines()
                have = [m for m, hw in table.items() if getattr(hw, n) is not None]
                hint = f"; machines providing it: {', '.join(have)}" if have else ""
                raise ModelError(f"machine {self.name!r} has no {n} metric{hint}")
            values.append(v)
        return tuple(values)

    def present(self) -> dict:
        return {f: getattr(self, f) for f in METRIC_FIELDS if getattr(self, f) is not None}


_TABLE_CACHE: dict = {}


def load_machines(path=None) -> dict:
    """Machine table, name -> HardwareMetrics. Without ``path`` the bundled table."""
    if path is None:
        text = resources.files("unifort").joinpath("data/machines.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)["machines"]
    known = {f.name for f in fields(HardwareMetrics)}
    table = {}
    for name, entry in raw.items():
        unknown = set(entry) - known
        if unknown:
            raise ModelError(f"machine {name!r}: unknown fields {sorted(unknown)}")
        table[name] = HardwareMetrics(name=name, **entry)
    if path is None:
        _TABLE_CACHE.clear()
        _TABLE_CACHE.update(table)
    return table


def _norm(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.lower())


def get_machine(name: str, table: Optional[dict] = None) -> HardwareMetrics:
    table = table if table is not None else load_machines()
    key = _norm(name)
    for known, hw in table.items():
        if _norm(known) == key:
            return hw
    raise ModelError(f"unknown machine {name!r}; available: {', '.join(sorted(table))}")


@dataclass(frozen=True)
class ModelParams:
    nx: int
    ny: int
    nz: int
    steps: int = DEFAULT_STEPS
    b: int = DOUBLE_BYTES
    m_sa: int = M_SA_CACHED
    m_ra: int = M_RA
    m_htod: float = 0.0
    m: int = 2  # values read + written per point update

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) <= 0:
            raise ModelError("grid extents must be positive")
        if self.steps < 0:
            raise ModelError("steps must be non-negative")
        if self.b <= 0 or self.m_sa < 0 or self.m_ra < 0 or self.m_htod < 0 or self.m <= 0:
            raise ModelError("b must be positive and access counts non-negative")

    @classmethod
    def preset(cls, nx, ny, nz, steps=DEFAULT_STEPS, cached=True, m_htod=0.0) -> "ModelParams":
        return cls(nx, ny, nz, steps, DOUBLE_BYTES, M_SA_CACHED if cached else M_SA_UNCACHED, M_RA, m_htod)

    @property
    def cached(self) -> bool:
        return self.m_sa == M_SA_CACHED


def arithmetic_intensity(c: float, b: float, m: float) -> float:
    """FLOP per byte for ``c`` FLOP per update touching ``m`` values of ``b`` bytes."""
    if b <= 0 or m <= 0:
        raise ModelError("b and m must be positive")
    return c / (b * m)


def compute_bound_threshold(metrics: HardwareMetrics) -> float:
    """Minimum arithmetic intensity at which the device becomes compute bound."""
    p, bw = metrics.require("P_D", "BW_D")
    return p / bw


def _rhs_fraction(metrics: HardwareMetrics) -> Fraction:
    bw_h, bw_htod, bw_d = (Fraction(str(v)) for v in metrics.require("BW_H", "BW_HtoD", "BW_D"))
    if bw_h >= bw_d:
        raise ModelError(f"{metrics.name}: BW_H >= BW_D, offloading can never pay off under this model")
    return (bw_h / bw_htod) / (1 - bw_h / bw_d)


def speedup_rhs(metrics: HardwareMetrics) -> float:
    """Threshold the ratio n_i*m/m_HtoD has to exceed for the device to win."""
    return float(_rhs_fraction(metrics))


def speedup_lhs(n_i: float, m: float, m_htod: float) -> float:
    if m_htod <= 0:
        raise ModelError("m_HtoD must be positive")
    return n_i * m / m_htod


def offload_feasible(n_i: float, m: float, m_htod: float, metrics: HardwareMetrics) -> bool:
    """Exact comparison lhs > rhs, done on rationals before any rounding."""
    if m_htod <= 0:
        raise ModelError("m_HtoD must be positive")
    lhs = Fraction(str(n_i)) * Fraction(str(m)) / Fraction(str(m_htod))
    return lhs > _rhs_fraction(metrics)


def cpu_model_time(params: ModelParams, metrics: HardwareMetrics, cores: str = "socket") -> float:
    """Seconds on one core (``single``) or one socket (``socket``)."""
    if cores not in ("single", "socket"):
        raise ModelError("cores must be 'single' or 'socket'")
    bw, ra = metrics.require("BW_H1C" if cores == "single" else "BW_H", "RA_H")
    p = params
    per_step = (p.nx * p.ny * p.nz * p.b * p.m_sa / (bw * GIGA)
                + p.ny * p.nz * p.m_ra / (ra * GIGA))
    return p.steps * per_step


def gpu_model_time(params: ModelParams, metrics: HardwareMetrics) -> float:
    p = params
    bw_d, ra_d = metrics.require("BW_D", "RA_D")
    transfer = 0.0
    if p.m_htod:
        (bw_htod,) = metrics.require("BW_HtoD")
        transfer = p.b * p.m_htod / (bw_htod * GIGA)
    per_step = (p.nx * p.ny * p.nz * (p.b * p.m_sa / (bw_d * GIGA) + transfer)
                + p.ny * p.nz * p.m_ra / (ra_d * GIGA))
    return p.steps * per_step


def round_sig(x: float, digits: int = 4) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


@dataclass
class Report:
    machine: str
    target: str
    params: ModelParams
    value: float
    unit: str
    verdict: Optional[bool] = None
    detail: str = ""

    def text(self) -> str:
        p = self.params
        lines = [
            f"machine: {self.machine}",
            f"grid: {p.nx}x{p.ny}x{p.nz}  steps: {p.steps}  "
            f"{'cached' if p.cached else 'uncached'} (m_sa={p.m_sa})  m_ra={p.m_ra}  m_HtoD={p.m_htod:g}  m={p.m}",
        ]
        if self.target == "condition":
            lines.append(f"speedup threshold: {round_sig(self.value)}")
            if self.verdict is not None:
                lines.append(f"{self.detail}: {'offload pays off' if self.verdict else 'offload does not pay off'}")
        else:
            lines.append(f"{self.target} model time: {round_sig(self.value)} {self.unit}")
        return "\n".join(lines)

    def csv_header(self) -> list:
        return ["machine", "target", "nx", "ny", "nz", "steps", "m_sa", "m_ra", "m_htod", "value", "unit", "verdict"]

    def csv_row(self) -> list:
        p = self.params
        verdict = "" if self.verdict is None else str(self.verdict).lower()
        return [self.machine, self.target, p.nx, p.ny, p.nz, p.steps, p.m_sa, p.m_ra, f"{p.m_htod:g}",
                f"{round_sig(self.value)}", self.unit, verdict]

    def as_dict(self) -> dict:
        out = asdict(self)
        out["params"] = asdict(self.params)
        return out


def model_report(machine: HardwareMetrics, params: ModelParams, target: str = "gpu") -> Report:
    if target == "cpu1":
        return Report(machine.name, target, params, cpu_model_time(params, machine, "single"), "s")
    if target == "cpu":
        return Report(machine.name, target, params, cpu_model_time(params, machine, "socket"), "s")
    if target == "gpu":
        return Report(machine.name, target, params, gpu_model_time(params, machine), "s")
    if target == "condition":
        rhs = speedup_rhs(machine)
        verdict, detail = None, ""
        if params.m_htod > 0:
            m = params.m
            verdict = offload_feasible(params.steps, m, params.m_htod, machine)
            detail = f"n_i*m/m_HtoD = {round_sig(speedup_lhs(params.steps, m, params.m_htod))}"
        return Report(machine.name, target, params, rhs, "", verdict, detail)
    raise ModelError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
