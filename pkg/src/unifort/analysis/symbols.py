"""Two-pass symbol resolution and domain merging."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..diagnostics import Diagnostic, TranspileError
from ..frontend.ast import (
    Apply,
    Dim,
    Do,
    DomainDependantSpec,
    Name,
    Program,
    RoutineDecl,
    SymbolSpec,
    stmt_exprs,
    walk_expr,
    walk_stmts,
)

HOST_ONLY = "host-only"
DEVICE_RESIDENT = "device-resident"
TRANSFER_HERE = "transfer-at-this-routine"


@dataclass(frozen=True)
class LogicalDomain:
    name: str
    lower: object
    upper: object
    parallel: bool = False

    @property
    def bounds(self):
        return (self.lower, self.upper)


@dataclass
class SymbolRecord:
    name: str
    owner: str  # module or routine that declares the symbol
    scope: str  # module or routine whose view this record is
    spec: SymbolSpec
    directive: Optional[DomainDependantSpec] = None
    flags: frozenset = frozenset()
    acc_pp: Optional[str] = None
    dom_pp: Optional[str] = None
    device_state: str = HOST_ONLY
    independent_names: tuple = ()

    @property
    def declared(self) -> tuple:
        return self.spec.dimensions

    @property
    def intent(self) -> str:
        return self.spec.intent

    @property
    def is_array(self) -> bool:
        return bool(self.spec.dimensions)

    @property
    def is_domain_dependant(self) -> bool:
        return self.directive is not None

    def logical_domains(self, extend: bool = True) -> list[LogicalDomain]:
        """Merged domains for this symbol; ``extend`` adds the parallel domains."""
        base = [LogicalDomain(n, d.lower, d.upper, False)
                for n, d in zip(self.independent_names, self.declared)]
        if self.directive is None:
            return base
        return merge_domains(base, self.directive, extend)

    def extended(self, extend: bool = True) -> bool:
        return len(self.logical_domains(extend)) > len(self.declared)


def merge_domains(declared: Sequence, spec: DomainDependantSpec, extend: bool = True) -> list[LogicalDomain]:
    """Combine declared dimensions with a directive's domains.

    Declared dimensions become independent domains; directive domains not
    found among them are parallel domains placed in front. Already merged
    input (LogicalDomain items) keeps its markers, so merging is idempotent.
    """
    current = []
    for idx, d in enumerate(declared):
        if isinstance(d, LogicalDomain):
            current.append(d)
        else:
            current.append(LogicalDomain(f"_d{idx + 1}", d.lower, d.upper, False))
    if not spec.domains:
        return current
    matched = set()
    new_parallel = []
    for dd in spec.domains:
        hit = None
        for idx, d in enumerate(current):
            if idx not in matched and d.name == dd.name and d.bounds == (dd.lower, dd.upper):
                hit = idx
                break
        if hit is None:
            for idx, d in enumerate(current):
                if idx not in matched and d.bounds == (dd.lower, dd.upper):
                    hit = idx
                    break
        if hit is None:
            new_parallel.append(LogicalDomain(dd.name, dd.lower, dd.upper, True))
        else:
            matched.add(hit)
    if "autoDom" not in spec.flags and len(matched) < len(current):
        missing = [d.name for i, d in enumerate(current) if i not in matched]
        raise TranspileError.single(
            "domain-superset",
            "domName must be a superset of the declared dimensions (missing " + ", ".join(missing) + ")",
            spec.origin)
    if not extend:
        return current
    return new_parallel + current


@dataclass
class SymbolTable:
    records: dict = field(default_factory=dict)  # (scope, name) -> SymbolRecord
    scopes: dict = field(default_factory=dict)  # scope -> {name: record}

    def lookup(self, scope: str, name: str) -> Optional[SymbolRecord]:
        return self.scopes.get(scope, {}).get(name)

    def __getitem__(self, key):
        return self.records[key]

    def __contains__(self, key):
        return key in self.records

    def in_scope(self, scope: str) -> dict:
        return self.scopes.get(scope, {})


def _independent_names(routine: Optional[RoutineDecl], spec: SymbolSpec) -> tuple:
    """Guess iterator names for declared dimensions from subscripts in the body."""
    names = [None] * spec.rank
    if routine is not None:
        loop_vars = {s.var for s in walk_stmts(routine.body) if isinstance(s, Do)}
        for stmt in walk_stmts(routine.body):
            for e in stmt_exprs(stmt):
                for sub in walk_expr(e):
                    if isinstance(sub, Apply) and sub.name == spec.name and len(sub.args) == spec.rank:
                        for idx, a in enumerate(sub.args):
                            if names[idx] is None and isinstance(a, Name) and a.name in loop_vars:
                                names[idx] = a.name
    return tuple(n or f"_d{i + 1}" for i, n in enumerate(names))


def _device_state(flags: frozenset, has_gpu_region: bool) -> str:
    if "present" in flags:
        return DEVICE_RESIDENT
    if "transferHere" in flags:
        return TRANSFER_HERE
    if "host" in flags:
        return HOST_ONLY
    return TRANSFER_HERE if has_gpu_region else HOST_ONLY


def _attach(records: dict, blocks: list, scope: str, owner_of, diags: list, has_gpu: bool):
    for block in blocks:
        for name in block.symbols:
            rec = records.get(name)
            if rec is None:
                diags.append(Diagnostic("undeclared-symbol",
                                        f"@domainDependant names {name}, which has no specification in scope",
                                        block.origin))
                continue
            if rec.scope != scope:
                rec = dataclasses.replace(rec, scope=scope)
                records[name] = rec
            rec.directive = block
            rec.flags = block.flags
            rec.acc_pp = block.acc_pp
            rec.dom_pp = block.dom_pp
            rec.device_state = _device_state(block.flags, has_gpu)


def resolve_symbols(program: Program) -> SymbolTable:
    """Pass 1 collects module specifications, pass 2 links routine scopes."""
    table = SymbolTable()
    diags: list[Diagnostic] = []
    module_scopes: dict[str, dict] = {}
    for mod in program.modules:
        scope = {}
        for spec in mod.specs:
            scope[spec.name] = SymbolRecord(spec.name, mod.name, mod.name, spec,
                                            independent_names=_independent_names(None, spec))
        _attach(scope, mod.domain_blocks, mod.name, None, diags, False)
        module_scopes[mod.name] = scope
        table.scopes[mod.name] = scope
        for name, rec in scope.items():
            table.records[(mod.name, name)] = rec

    for routine in program.all_routines():
        visible: dict = {}
        if routine.module is not None:
            visible.update(module_scopes.get(routine.module, {}))
        for use in routine.uses:
            imported = module_scopes.get(use.module)
            if imported is None:
                continue  # foreign module (e.g. runtime libraries)
            for name, rec in imported.items():
                if use.only is None or name in use.only:
                    visible[name] = rec
        for spec in routine.specs:
            visible[spec.name] = SymbolRecord(spec.name, routine.name, routine.name, spec,
                                              independent_names=_independent_names(routine, spec))
        has_gpu = any("gpu" in r.spec.applies_to for r in routine.regions())
        _attach(visible, routine.domain_blocks, routine.name, None, diags, has_gpu)
        for name, rec in visible.items():
            if rec.scope == routine.name:
                table.records[(routine.name, name)] = rec
        table.scopes[routine.name] = visible
    if diags:
        raise TranspileError(diags)
    return table
