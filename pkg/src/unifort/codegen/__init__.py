"""Phase 7: backend code generation from the application model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import Diagnostic, TranspileError
from ..frontend.ast import ModuleDecl, Program, UseStmt
from .base import Backend, LayoutTable
from .config import BACKEND_ARCH, BACKENDS, TARGETS, BuildConfig, TargetConfig
from .cuda import CudaBackend, kernel_name
from .openacc import OpenACCBackend
from .openmp import OpenMPBackend
from .storage import STORAGE_FILE, family, storage_definitions, storage_table
from .transfers import Transfer, TransferPlan, generate_transfers
from .validate import check_kernels, validate_kernel_body

BACKEND_CLASSES = {
    "plain": Backend,
    "openmp": OpenMPBackend,
    "cuda": CudaBackend,
    "openacc": OpenACCBackend,
}
SCHEME_ALIASES = {"cuda-fortran": "cuda", "cudafortran": "cuda", "plain-fortran": "plain", "fortran": "plain"}


@dataclass
class EmittedUnit:
    path: str
    text: str
    provenance: list = field(default_factory=list)  # origin (or None) per generated line
    macro_text: str = ""  # before storage-order expansion
    target: Optional[str] = None

    @property
    def lines(self) -> list:
        return self.text.splitlines()

    def origin_of(self, lineno: int):
        """Source origin of a 1-based generated line number."""
        return self.provenance[lineno - 1]


def select_backend(decl, config: TargetConfig, diags: list) -> str:
    if decl.scheme:
        scheme = SCHEME_ALIASES.get(decl.scheme.lower(), decl.scheme.lower())
        if scheme not in BACKENDS:
            diags.append(Diagnostic("unknown-scheme", f"@scheme names unknown backend {decl.scheme!r}", decl.origin))
        elif BACKEND_ARCH[scheme] == config.architecture:
            return scheme
    return config.backend


@dataclass
class Generated:
    program: Program
    aliases: dict
    backends: dict  # routine -> backend name


def generate(model, config: TargetConfig) -> Generated:
    """Transform every routine with its backend; raises on any diagnostic."""
    arch = config.architecture
    if arch == "gpu":
        check_kernels(model, arch)
    layouts = LayoutTable(model, arch)
    instances: dict = {}
    diags: list = []
    chosen: dict = {}

    def backend_for(decl):
        name = select_backend(decl, config, diags)
        chosen[decl.name] = name
        if name not in instances:
            cls = BACKEND_CLASSES[name]
            if cls.architecture != arch:
                # plain Fortran serves both architectures for unsupported combinations
                cls = type(f"{cls.__name__}_{arch}", (cls,), {"architecture": arch})
            instances[name] = cls(model, config, layouts)
        return instances[name]

    def transform(routines):
        out = []
        for r in routines:
            out.extend(backend_for(r).transform_routine(model.routines[r.name]))
        return out

    modules = []
    try:
        for mod in model.program.modules:
            routines = transform(mod.routines)
            default = instances.get(config.backend) or BACKEND_CLASSES[config.backend](model, config, layouts)
            specs = [default.transform_module_spec(mod, s) for s in mod.specs]
            uses = list(mod.uses)
            if any(chosen.get(r.name) == "cuda" for r in mod.routines):
                uses.append(UseStmt("cudafor", origin=mod.origin))
            modules.append(ModuleDecl(mod.name, specs, uses, [], routines, mod.implicit_none, mod.path, mod.origin))
        free = transform(model.program.routines)
    except TranspileError as exc:
        diags.extend(exc.diagnostics)
        raise TranspileError(diags)
    for be in instances.values():
        diags.extend(be.diagnostics)
    if diags:
        raise TranspileError(diags)
    return Generated(Program(modules, free), layouts.aliases(), chosen)


__all__ = [
    "BACKEND_CLASSES", "BACKENDS", "TARGETS", "Backend", "BuildConfig", "CudaBackend", "EmittedUnit",
    "Generated", "LayoutTable", "OpenACCBackend", "OpenMPBackend", "STORAGE_FILE", "TargetConfig",
    "Transfer", "TransferPlan", "check_kernels", "family", "generate", "generate_transfers", "kernel_name",
    "storage_definitions", "storage_table", "validate_kernel_body",
]
