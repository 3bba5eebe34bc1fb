"""Machinery shared by all backends.

A backend turns the annotated program into plain Fortran (plus directives)
for one architecture: symbols get their final shape (parallel domains added
where privatization requires it), accesses are wrapped in storage-order
macros, call sites pass whole objects to extended dummies, and each parallel
region is handed to the backend-specific ``emit_region`` hook.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..analysis.callgraph import INSIDE_KERNEL, INTRINSICS
from ..analysis.symbols import SymbolRecord
from ..diagnostics import Diagnostic, TranspileError
from ..frontend.ast import (
    Apply,
    Assign,
    BinOp,
    Call,
    Component,
    Dim,
    Do,
    DoWhile,
    If,
    Macro,
    ModuleDecl,
    Name,
    ParallelRegion,
    PointerAssign,
    Print,
    Program,
    Return,
    RoutineDecl,
    Slice,
    SymbolSpec,
    UnOp,
    UseStmt,
    base_name,
    referenced_names,
    stmt_exprs,
    walk_expr,
    walk_stmts,
)
from .config import TargetConfig
from .storage import family


@dataclass(frozen=True)
class Layout:
    """Final shape and storage-order wrapping of one symbol in one scope."""

    record: SymbolRecord
    domains: tuple
    extended: bool
    wrapped: bool
    acc: Optional[str] = None
    dom: Optional[str] = None

    @property
    def name(self) -> str:
        return self.record.name

    @property
    def rank(self) -> int:
        return len(self.domains)

    @property
    def parallel_names(self) -> list:
        return [d.name for d in self.domains if d.parallel]

    @property
    def dims(self) -> tuple:
        return tuple(Dim(d.lower, d.upper) for d in self.domains)


def _wants_wrap(rec: SymbolRecord, rank: int) -> bool:
    if rec.directive is None:
        return False
    explicit = bool(rec.acc_pp or rec.dom_pp)
    return explicit or ("autoDom" in rec.flags and rank >= 2)


def _macros(rec: SymbolRecord, rank: int) -> tuple:
    acc, dom = family(rank)
    return rec.acc_pp or acc, rec.dom_pp or dom


class LayoutTable:
    """Layouts for every (scope, symbol) under one architecture."""

    def __init__(self, model, arch: str):
        self.model = model
        self.arch = arch
        self.colors = model.colors.get(arch, {})
        self.module_names = {m.name for m in model.program.modules}
        self._cache: dict = {}
        # module variables share one declaration, so they are wrapped if any scope asks for it
        self.module_macros: dict = {}
        for scope in list(model.symbols.scopes):
            for rec in model.symbols.in_scope(scope).values():
                if rec.owner in self.module_names and rec.directive is not None:
                    rank = len(rec.declared)
                    if _wants_wrap(rec, rank):
                        self.module_macros.setdefault((rec.owner, rec.name), _macros(rec, rank))

    def extend_in(self, routine: str) -> bool:
        return not (self.arch == "cpu" and self.colors.get(routine) == INSIDE_KERNEL)

    def get(self, scope: str, name: str) -> Optional[Layout]:
        key = (scope, name)
        if key not in self._cache:
            self._cache[key] = self._compute(scope, name)
        return self._cache[key]

    def _compute(self, scope: str, name: str) -> Optional[Layout]:
        rec = self.model.symbols.lookup(scope, name)
        if rec is None:
            return None
        if rec.owner in self.module_names:
            if rec.directive is not None:
                domains = rec.logical_domains(True)
                if len(domains) > len(rec.declared):
                    raise TranspileError.single(
                        "module-extension",
                        f"module variable {name} cannot gain parallel domains; declare it with its full shape",
                        rec.directive.origin)
            macros = self.module_macros.get((rec.owner, name))
            if macros is None:
                return None
            domains = tuple(rec.logical_domains(False))
            return Layout(rec, domains, False, True, *macros)
        if rec.directive is None:
            return None
        extend = self.extend_in(scope)
        domains = tuple(rec.logical_domains(extend))
        extended = len(domains) > len(rec.declared)
        wrapped = _wants_wrap(rec, len(domains))
        acc, dom = _macros(rec, len(domains))
        return Layout(rec, domains, extended, wrapped, acc, dom)

    def aliases(self) -> dict:
        """Custom accPP/domPP names -> (rank, kind) for the storage header."""
        out = {}
        for scope in self.model.symbols.scopes:
            for rec in self.model.symbols.in_scope(scope).values():
                if rec.directive is None:
                    continue
                lay = self.get(scope, rec.name) if rec.scope == scope else None
                rank = lay.rank if lay else len(rec.logical_domains(True))
                if rec.acc_pp and rec.acc_pp != family(rank)[0]:
                    out[rec.acc_pp] = (rank, "acc")
                if rec.dom_pp and rec.dom_pp != family(rank)[1]:
                    out[rec.dom_pp] = (rank, "dom")
        return out


@dataclass
class RoutineContext:
    backend: "Backend"
    rm: object  # RoutineModel
    color: str
    scope: dict
    extra_specs: list = field(default_factory=list)
    extra_params: list = field(default_factory=list)
    extra_routines: list = field(default_factory=list)
    declared_iterators: list = field(default_factory=list)
    spec_directives: list = field(default_factory=list)
    region_depth: int = 0
    state: dict = field(default_factory=dict)  # backend-specific

    @property
    def decl(self) -> RoutineDecl:
        return self.rm.decl

    @property
    def name(self) -> str:
        return self.rm.decl.name

    def layout(self, name: str) -> Optional[Layout]:
        return self.backend.layouts.get(self.name, name)

    def final_rank(self, name: str) -> int:
        lay = self.layout(name)
        if lay is not None:
            return lay.rank
        rec = self.scope.get(name)
        return rec.spec.rank if rec is not None else 0

    def is_array(self, name: str) -> bool:
        return self.final_rank(name) > 0

    def declare_iterator(self, name: str) -> None:
        if name not in self.scope and name not in self.declared_iterators:
            self.declared_iterators.append(name)


class Backend:
    """Plain Fortran for the CPU: regions become sequential loop nests."""

    name = "plain"
    architecture = "cpu"

    def __init__(self, model, config: TargetConfig, layouts: Optional[LayoutTable] = None):
        self.model = model
        self.config = config
        self.layouts = layouts or LayoutTable(model, self.architecture)
        self.diagnostics: list[Diagnostic] = []

    # -- program level --------------------------------------------------

    @property
    def arch(self) -> str:
        return self.architecture

    def color(self, routine: str) -> str:
        return self.model.colors[self.arch][routine]

    def module_uses(self) -> list:
        return []

    def transform_module_spec(self, module: ModuleDecl, spec: SymbolSpec) -> SymbolSpec:
        lay = self.layouts.get(module.name, spec.name)
        if lay is None:
            return spec
        return dataclasses.replace(spec, dimensions=lay.dims, dom_macro=lay.dom if lay.wrapped else None)

    # -- routine level --------------------------------------------------

    def context(self, rm) -> RoutineContext:
        name = rm.decl.name
        return RoutineContext(self, rm, self.color(name), self.model.symbols.in_scope(name))

    def transform_routine(self, rm) -> list[RoutineDecl]:
        ctx = self.context(rm)
        self.prepare(ctx)
        body = self.rewrite_block(rm.decl.body, ctx)
        body = self.prologue(ctx) + body + self.epilogue(ctx)
        decl = rm.decl
        specs = [self.transform_spec(s, ctx) for s in decl.specs]
        for it in ctx.declared_iterators:
            specs.append(SymbolSpec(it, "integer4", origin=decl.origin))
        specs.extend(ctx.extra_specs)
        host = RoutineDecl(
            name=decl.name,
            params=tuple(decl.params) + tuple(ctx.extra_params),
            specs=specs,
            uses=list(decl.uses) + self.routine_uses(ctx),
            domain_blocks=[],
            body=body,
            module=decl.module,
            prefix=self.routine_prefix(ctx),
            scheme=None,
            implicit_none=decl.implicit_none,
            origin=decl.origin,
            spec_directives=list(ctx.spec_directives),
        )
        return ctx.extra_routines + [host]

    def routine_uses(self, ctx) -> list:
        return []

    def routine_prefix(self, ctx) -> Optional[str]:
        return None

    def prepare(self, ctx) -> None:
        extra = self.kernel_iterators(ctx.name)
        for it in extra:
            ctx.extra_params.append(it)
            ctx.extra_specs.append(self.iterator_param_spec(it, ctx))

    def iterator_param_spec(self, name: str, ctx) -> SymbolSpec:
        return SymbolSpec(name, "integer4", intent="in", origin=ctx.decl.origin)

    def prologue(self, ctx) -> list:
        return []

    def epilogue(self, ctx) -> list:
        return []

    def before_return(self, ctx) -> list:
        return []

    def transform_spec(self, spec: SymbolSpec, ctx) -> SymbolSpec:
        lay = ctx.layout(spec.name)
        if lay is None:
            return spec
        return dataclasses.replace(spec, dimensions=lay.dims, dom_macro=lay.dom if lay.wrapped else None)

    def kernel_iterators(self, routine: str) -> list:
        """Iterator names a GPU inside-kernel routine receives from its caller."""
        if self.arch != "gpu" or self.color(routine) != INSIDE_KERNEL:
            return []
        out = []
        for name in self.model.symbols.in_scope(routine):
            lay = self.layouts.get(routine, name)
            if lay is not None and lay.extended:
                for it in lay.parallel_names:
                    if it not in out:
                        out.append(it)
        return out

    # -- rewriting ------------------------------------------------------

    def rewrite_expr(self, e, ctx):
        if isinstance(e, Apply):
            args = tuple(self.rewrite_expr(a, ctx) for a in e.args)
            lay = ctx.layout(e.name)
            if lay is None:
                return Apply(e.name, args)
            if lay.extended and len(args) == len(lay.record.declared):
                args = tuple(Name(n) for n in lay.parallel_names) + args
            if lay.wrapped and len(args) == lay.rank:
                return Apply(e.name, (Macro(lay.acc, args),))
            return Apply(e.name, args)
        if isinstance(e, Name):
            lay = ctx.layout(e.name)
            if lay is not None and lay.extended and not lay.record.is_array:
                args = tuple(Name(n) for n in lay.parallel_names)
                return Apply(e.name, (Macro(lay.acc, args),) if lay.wrapped else args)
            return e
        if isinstance(e, BinOp):
            return BinOp(e.op, self.rewrite_expr(e.left, ctx), self.rewrite_expr(e.right, ctx))
        if isinstance(e, UnOp):
            return UnOp(e.op, self.rewrite_expr(e.operand, ctx))
        if isinstance(e, Slice):
            return Slice(self.rewrite_expr(e.lower, ctx) if e.lower is not None else None,
                         self.rewrite_expr(e.upper, ctx) if e.upper is not None else None)
        if isinstance(e, Component):
            return Component(self.rewrite_expr(e.base, ctx), e.field)
        if isinstance(e, Macro):
            return Macro(e.name, tuple(self.rewrite_expr(a, ctx) for a in e.args))
        return e

    def rewrite_call(self, call: Call, ctx) -> list:
        callee = self.model.routines.get(call.name)
        args = []
        for pos, a in enumerate(call.args):
            dummy = None
            if callee is not None and pos < len(callee.decl.params):
                dummy = callee.decl.params[pos]
            clay = self.layouts.get(call.name, dummy) if dummy else None
            base = base_name(a)
            if clay is not None and clay.extended and base is not None and base in ctx.scope:
                args.append(self.call_argument(Name(base), ctx))
            else:
                args.append(self.call_argument(self.rewrite_expr(a, ctx), ctx))
        if callee is not None:
            args.extend(Name(it) for it in self.kernel_iterators(call.name))
        return [Call(call.name, tuple(args), call.launch, call.origin)]

    def call_argument(self, arg, ctx):
        return arg

    def rewrite_block(self, stmts, ctx) -> list:
        out = []
        for s in stmts:
            out.extend(self.rewrite_stmt(s, ctx))
        return out

    def rewrite_stmt(self, s, ctx) -> list:
        rw = lambda e: self.rewrite_expr(e, ctx) if e is not None else None  # noqa: E731
        if isinstance(s, ParallelRegion):
            return self.emit_region(s, ctx)
        if isinstance(s, Assign):
            return [Assign(rw(s.target), rw(s.value), s.origin)]
        if isinstance(s, PointerAssign):
            return [PointerAssign(rw(s.target), rw(s.value), s.origin)]
        if isinstance(s, Do):
            loop = Do(s.var, rw(s.start), rw(s.end), rw(s.step), self.rewrite_block(s.body, ctx), s.origin)
            return self.sequential_loop(loop, ctx)
        if isinstance(s, DoWhile):
            return [DoWhile(rw(s.cond), self.rewrite_block(s.body, ctx), s.origin)]
        if isinstance(s, If):
            branches = [(rw(c), self.rewrite_block(b, ctx)) for c, b in s.branches]
            else_body = self.rewrite_block(s.else_body, ctx) if s.else_body is not None else None
            return [If(branches, else_body, s.origin)]
        if isinstance(s, Call):
            return self.rewrite_call(s, ctx)
        if isinstance(s, Return):
            return self.before_return(ctx) + [s]
        if isinstance(s, Print):
            return [Print(rw(s.fmt), tuple(rw(i) for i in s.items), s.origin)]
        return [s]

    def sequential_loop(self, loop: Do, ctx) -> list:
        return [loop]

    # -- regions --------------------------------------------------------

    def region_body(self, region: ParallelRegion, ctx) -> list:
        ctx.region_depth += 1
        try:
            return self.rewrite_block(region.body, ctx)
        finally:
            ctx.region_depth -= 1

    def loop_nest(self, region: ParallelRegion, body: list, ctx, before=None) -> list:
        """Nested loops over the region domains, last domain outermost.

        ``before`` maps a nesting depth (0 = outermost) to directive
        statements placed in front of that loop.
        """
        before = before or {}
        domains = list(region.spec.domains)
        for d in domains:
            ctx.declare_iterator(d.name)
        inner = body
        for depth in range(len(domains) - 1, -1, -1):
            d = domains[len(domains) - 1 - depth]
            rw = self.rewrite_expr
            loop = Do(d.name, rw(d.start, ctx), rw(d.end, ctx), None, inner, region.origin)
            inner = list(before.get(depth, [])) + [loop]
        return inner

    def emit_region(self, region: ParallelRegion, ctx) -> list:
        body = self.region_body(region, ctx)
        if not region.spec.applies(self.arch):
            return body
        self.check_reductions(region, ctx)
        return self.loop_nest(region, body, ctx)

    def check_reductions(self, region: ParallelRegion, ctx) -> None:
        assigned = set()
        for s in walk_stmts(region.body):
            if isinstance(s, Assign):
                assigned.add(base_name(s.target))
        for op, sym in region.spec.reductions:
            if sym not in assigned:
                self.diagnostics.append(Diagnostic(
                    "reduction-unassigned",
                    f"reduction variable {sym} is never assigned in the region body",
                    region.spec.origin or region.origin))

    # -- helpers for subclasses ----------------------------------------

    def arrays_used(self, stmts, ctx) -> list:
        """Array symbols (final shape) referenced in ``stmts``, first-use order."""
        out = []
        for s in walk_stmts(stmts):
            for e in stmt_exprs(s):
                for n in referenced_names(e):
                    if n in ctx.scope and ctx.is_array(n) and n not in out:
                        out.append(n)
        return out


def program_names(program: Program) -> set:
    return {r.name for r in program.all_routines()} | set(INTRINSICS)


def names_in(exprs) -> list:
    out = []
    for e in exprs:
        for sub in walk_expr(e):
            if isinstance(sub, Name) and sub.name not in out:
                out.append(sub.name)
            elif isinstance(sub, Apply) and sub.name not in out:
                out.append(sub.name)
    return out


def use_stmt(module: str) -> UseStmt:
    return UseStmt(module)
