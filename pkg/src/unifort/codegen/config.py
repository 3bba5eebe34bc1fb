"""Target and build configuration."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ..diagnostics import TranspileError
from ..source import DEFAULT_MAX_LINE_LENGTH

BACKENDS = ("openmp", "cuda", "openacc", "plain")
BACKEND_ARCH = {"openmp": "cpu", "plain": "cpu", "cuda": "gpu", "openacc": "gpu"}
TARGETS = {
    "cpu-openmp": ("cpu", "openmp"),
    "gpu-cuda": ("gpu", "cuda"),
    "gpu-openacc": ("gpu", "openacc"),
    "plain": ("cpu", "plain"),
}
DEFAULT_BLOCK = (32, 16, 1)
MAX_RANK = 7
AXES = "XYZ"
LETTERS = "IJKLMNO"


def default_order(arch: str, rank: int) -> tuple:
    # GPU keeps the declared order; CPU moves the leading (parallel) domains last
    if arch == "gpu" or rank <= 2:
        return tuple(range(1, rank + 1))
    return tuple(range(rank, 0, -1))


def parse_order(text: str) -> tuple:
    """``3,1,2`` or ``KIJ`` -> 1-based permutation tuple."""
    text = text.strip().strip('"').strip("'")
    if re.fullmatch(r"[A-Za-z]+", text):
        letters = text.upper()
        if any(ch not in LETTERS for ch in letters):
            raise ValueError(f"storage order letters must be drawn from {LETTERS}")
        return tuple(LETTERS.index(ch) + 1 for ch in letters)
    return tuple(int(p) for p in re.split(r"[,\s]+", text) if p)


def check_permutation(order: tuple, rank: int) -> None:
    if sorted(order) != list(range(1, rank + 1)):
        raise TranspileError.single("config", f"storage order {order} is not a permutation of 1..{rank}")


@dataclass
class TargetConfig:
    architecture: str = "cpu"
    backend: str = "openmp"
    block_size: tuple = DEFAULT_BLOCK
    template_block_sizes: dict = field(default_factory=dict)  # template -> {axis: size}
    storage_order: dict = field(default_factory=dict)  # (arch, rank) -> permutation
    max_line_length: int = DEFAULT_MAX_LINE_LENGTH
    name: Optional[str] = None

    def __post_init__(self):
        if self.architecture not in ("cpu", "gpu"):
            raise TranspileError.single("config", f"unknown architecture {self.architecture!r}")
        if self.backend not in BACKENDS:
            raise TranspileError.single("config", f"unknown backend {self.backend!r}")
        if len(self.block_size) != 3 or any(int(b) <= 0 for b in self.block_size):
            raise TranspileError.single("config", f"block sizes must be three positive integers, got {self.block_size}")
        for sizes in self.template_block_sizes.values():
            if any(int(v) <= 0 for v in sizes.values()):
                raise TranspileError.single("config", "template block sizes must be positive")
        for (arch, rank), order in self.storage_order.items():
            check_permutation(tuple(order), rank)
        if self.max_line_length < 20:
            raise TranspileError.single("config", "maximum line length must be at least 20")

    @classmethod
    def for_target(cls, target: str, build: Optional["BuildConfig"] = None) -> "TargetConfig":
        if target not in TARGETS:
            raise TranspileError.single("config", f"unknown target {target!r} (known: {', '.join(TARGETS)})")
        arch, backend = TARGETS[target]
        build = build or BuildConfig()
        return cls(arch, backend, build.block_size, dict(build.template_block_sizes),
                   dict(build.storage_order), build.max_line_length, target)

    def order(self, arch: str, rank: int) -> tuple:
        return tuple(self.storage_order.get((arch, rank), default_order(arch, rank)))

    def block_for(self, template: Optional[str]) -> tuple:
        block = list(self.block_size)
        if template and template in self.template_block_sizes:
            for axis, size in self.template_block_sizes[template].items():
                block[axis] = int(size)
        return tuple(block)

    def with_order(self, arch: str, rank: int, order) -> "TargetConfig":
        orders = dict(self.storage_order)
        orders[(arch, rank)] = tuple(order)
        return replace(self, storage_order=orders)

    @property
    def target_name(self) -> str:
        if self.name:
            return self.name
        for name, pair in TARGETS.items():
            if pair == (self.architecture, self.backend):
                return name
        return f"{self.architecture}-{self.backend}"


@dataclass
class BuildConfig:
    """Central build settings, parsed from ``KEY = VALUE`` (or ``#define KEY VALUE``) text."""

    default_backend: dict = field(default_factory=lambda: {"cpu": "openmp", "gpu": "cuda"})
    block_size: tuple = DEFAULT_BLOCK
    template_block_sizes: dict = field(default_factory=dict)
    storage_order: dict = field(default_factory=dict)
    max_line_length: int = DEFAULT_MAX_LINE_LENGTH
    output_dir: Optional[str] = None

    @classmethod
    def load(cls, path) -> "BuildConfig":
        return cls.parse(Path(path).read_text(encoding="utf-8"), str(path))

    @classmethod
    def parse(cls, text: str, path: str = "<config>") -> "BuildConfig":
        cfg = cls()
        block = list(cfg.block_size)
        for lineno, raw in enumerate(text.splitlines(), 1):
            origin = (path, lineno)
            line = raw.strip()
            if not line or line.startswith("!") or (line.startswith("#") and not line.startswith("#define")):
                continue
            m = re.match(r"^#define\s+(\w+)\s+(.+)$", line) or re.match(r"^(\w+)\s*=\s*(.+)$", line)
            if not m:
                raise TranspileError.single("config", f"cannot parse configuration line {raw!r}", origin)
            key, value = m.group(1).upper(), m.group(2).strip()
            try:
                cfg._apply(key, value, block, origin)
            except ValueError as exc:
                raise TranspileError.single("config", f"bad value for {key}: {exc}", origin)
        cfg.block_size = tuple(block)
        return cfg

    def _apply(self, key: str, value: str, block: list, origin) -> None:
        value = value.strip('"').strip("'")
        m = re.fullmatch(r"CUDA_BLOCKSIZE_([XYZ])(?:_(\w+))?", key)
        if m:
            size = int(value)
            if size <= 0:
                raise ValueError("block sizes must be positive")
            axis = AXES.index(m.group(1))
            if m.group(2):
                # template names keep the spelling used in the directive
                template = key.split("_", 3)[3] if key.count("_") >= 3 else m.group(2)
                self.template_block_sizes.setdefault(template, {})[axis] = size
            else:
                block[axis] = size
            return
        m = re.fullmatch(r"STORAGE_ORDER_(CPU|GPU)_(\d)", key)
        if m:
            rank = int(m.group(2))
            if not 1 <= rank <= MAX_RANK:
                raise ValueError(f"rank must be between 1 and {MAX_RANK}")
            order = parse_order(value)
            check_permutation(order, rank)
            self.storage_order[(m.group(1).lower(), rank)] = order
            return
        m = re.fullmatch(r"DEFAULT_BACKEND_(CPU|GPU)", key)
        if m:
            backend = value.lower()
            if backend not in BACKENDS:
                raise ValueError(f"unknown backend {value!r}")
            self.default_backend[m.group(1).lower()] = backend
            return
        if key == "MAX_LINE_LENGTH":
            self.max_line_length = int(value)
            return
        if key == "OUTPUT_DIR":
            self.output_dir = value
            return
        raise TranspileError.single("config", f"unknown configuration key {key}", origin)

    def target(self, name: str) -> TargetConfig:
        return TargetConfig.for_target(name, self)
