"""Application model: routines segmented into typed code regions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import Diagnostic, TranspileError
from ..frontend.ast import (
    ARCHITECTURES,
    Call,
    ParallelRegion,
    Program,
    RoutineDecl,
    child_blocks,
    referenced_names,
    stmt_exprs,
    walk_stmts,
)
from .callgraph import DEFAULT_EXTERNALS, INTRINSICS, CallGraph, build_callgraph, color_callgraph
from .symbols import SymbolTable, resolve_symbols

SPECIFICATION = "specification"
SEQUENTIAL = "sequential"
CALL = "call"
PARALLEL = "parallel"


@dataclass
class CodeRegion:
    kind: str
    statements: list
    used_symbols: list = field(default_factory=list)
    region: Optional[ParallelRegion] = None
    index: Optional[int] = None  # position among the routine's parallel regions


@dataclass
class RoutineModel:
    decl: RoutineDecl
    colors: dict  # arch -> color
    regions: list
    implementation: Optional[str] = None


@dataclass
class ApplicationModel:
    program: Program
    graph: CallGraph
    colors: dict  # arch -> {routine: color}
    symbols: SymbolTable
    routines: dict  # name -> RoutineModel

    def color(self, routine: str, arch: str) -> str:
        return self.colors[arch][routine]

    def routine(self, name: str) -> RoutineModel:
        return self.routines[name]


def _used(stmts, scope: dict) -> list[str]:
    out = []
    for s in walk_stmts(stmts):
        for e in stmt_exprs(s):
            for n in referenced_names(e):
                if n in scope and n not in out:
                    out.append(n)
    return out


def segment(routine: RoutineDecl, scope: dict) -> list[CodeRegion]:
    regions = [CodeRegion(SPECIFICATION, list(routine.specs), [s.name for s in routine.specs])]
    pending: list = []
    counter = 0

    def flush():
        if pending:
            regions.append(CodeRegion(SEQUENTIAL, list(pending), _used(pending, scope)))
            pending.clear()

    for stmt in routine.body:
        if isinstance(stmt, ParallelRegion):
            flush()
            regions.append(CodeRegion(PARALLEL, [stmt], _used([stmt], scope), stmt, counter))
            counter += 1
        elif isinstance(stmt, Call):
            flush()
            regions.append(CodeRegion(CALL, [stmt], _used([stmt], scope)))
        else:
            pending.append(stmt)
    flush()
    return regions


def check_symbols(program: Program, symbols: SymbolTable, externals=DEFAULT_EXTERNALS) -> None:
    """Every name used in a routine body must resolve (region iterators excepted)."""
    routine_names = {r.name for r in program.all_routines()}
    diags = []

    def visit(stmts, scope, iterators, routine):
        for s in stmts:
            local_iters = iterators
            if isinstance(s, ParallelRegion):
                local_iters = iterators | set(s.spec.domain_names)
            names = []
            for e in stmt_exprs(s):
                names.extend(referenced_names(e))
            if isinstance(s, Call):
                names = [n for n in names if n != s.name]
            for n in names:
                if n in scope or n in local_iters or n in INTRINSICS or n in externals or n in routine_names:
                    continue
                diags.append(Diagnostic("undeclared-symbol", f"{n} is used in {routine.name} but never declared",
                                        getattr(s, "origin", None)))
            for block in child_blocks(s):
                visit(block, scope, local_iters, routine)

    for r in program.all_routines():
        visit(r.body, symbols.in_scope(r.name), set(), r)
    if diags:
        raise TranspileError(diags)


def build_model(program: Program, graph: Optional[CallGraph] = None, colors: Optional[dict] = None,
                symbols: Optional[SymbolTable] = None, default_backend: Optional[str] = None,
                externals=DEFAULT_EXTERNALS) -> ApplicationModel:
    graph = graph or build_callgraph(program, externals)
    if colors is None:
        colors = {arch: color_callgraph(graph, arch) for arch in ARCHITECTURES}
    symbols = symbols or resolve_symbols(program)
    check_symbols(program, symbols, externals)
    routines = {}
    for r in program.all_routines():
        scope = symbols.in_scope(r.name)
        routines[r.name] = RoutineModel(
            decl=r,
            colors={arch: colors[arch][r.name] for arch in colors},
            regions=segment(r, scope),
            implementation=r.scheme or default_backend,
        )
    return ApplicationModel(program, graph, colors, symbols, routines)
