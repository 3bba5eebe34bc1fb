"""Syntax tree for the Fortran subset and the Hybrid directives.

Expressions are frozen and hashable. Statements carry an ``origin`` that is
excluded from equality so that re-parsed printer output compares equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..diagnostics import Origin

ARCHITECTURES = ("cpu", "gpu")


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Num:
    text: str

    @property
    def is_integer(self) -> bool:
        return self.text.split("_")[0].isdigit()

    @property
    def value(self) -> Union[int, float]:
        body = self.text.split("_")[0]
        if body.isdigit():
            return int(body)
        return float(body.lower().replace("d", "e"))


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Logical:
    value: bool


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Slice:
    lower: Optional["Expr"] = None
    upper: Optional["Expr"] = None


@dataclass(frozen=True)
class Apply:
    """Array reference or function call; symbol resolution decides which."""

    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Component:
    base: "Expr"
    field: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Macro:
    """Storage-order macro invocation such as ``AT(i, j, k)`` (kept uppercase)."""

    name: str
    args: tuple = ()


Expr = Union[Num, Str, Logical, Name, Slice, Apply, Component, BinOp, UnOp, Macro]


def walk_expr(expr):
    """Yield ``expr`` and every sub-expression, parents first."""
    if expr is None:
        return
    yield expr
    if isinstance(expr, (Apply, Macro)):
        for a in expr.args:
            yield from walk_expr(a)
    elif isinstance(expr, Slice):
        yield from walk_expr(expr.lower)
        yield from walk_expr(expr.upper)
    elif isinstance(expr, BinOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, UnOp):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Component):
        yield from walk_expr(expr.base)


def referenced_names(expr) -> list[str]:
    """Names read by an expression, in first-use order (function names included)."""
    seen = []
    for e in walk_expr(expr):
        n = e.name if isinstance(e, (Name, Apply)) else None
        if n is not None and n not in seen:
            seen.append(n)
    return seen


def base_name(expr) -> Optional[str]:
    if isinstance(expr, (Name, Apply)):
        return expr.name
    if isinstance(expr, Component):
        return base_name(expr.base)
    return None


# ---------------------------------------------------------------------------
# directives

@dataclass(frozen=True)
class Domain:
    name: str
    lower: Expr
    upper: Expr


@dataclass(frozen=True)
class RegionDomain:
    name: str
    lower: Expr
    upper: Expr
    start: Expr
    end: Expr


@dataclass
class ParallelRegionSpec:
    applies_to: frozenset
    domains: tuple
    reductions: tuple = ()
    template: Optional[str] = None
    origin: Optional[Origin] = field(default=None, compare=False)

    def applies(self, arch: str) -> bool:
        return arch in self.applies_to

    @property
    def domain_names(self) -> list[str]:
        return [d.name for d in self.domains]


DOMAIN_FLAGS = ("autoDom", "present", "transferHere", "host")


@dataclass
class DomainDependantSpec:
    domains: tuple = ()
    acc_pp: Optional[str] = None
    dom_pp: Optional[str] = None
    flags: frozenset = frozenset()
    symbols: tuple = ()
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class SchemeSpec:
    name: str
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class EndDirective:
    kind: str
    origin: Optional[Origin] = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# specifications

@dataclass(frozen=True)
class Dim:
    lower: Optional[Expr]
    upper: Optional[Expr]

    @property
    def deferred(self) -> bool:
        return self.upper is None


@dataclass
class SymbolSpec:
    name: str
    base_type: str
    dimensions: tuple = ()
    intent: str = "none"
    is_pointer: bool = False
    is_parameter: bool = False
    value: Optional[Expr] = None
    attributes: frozenset = frozenset()
    dom_macro: Optional[str] = None
    origin: Optional[Origin] = field(default=None, compare=False)

    @property
    def is_array(self) -> bool:
        return bool(self.dimensions)

    @property
    def rank(self) -> int:
        return len(self.dimensions)

    @property
    def has_save(self) -> bool:
        # initialised locals carry implicit save semantics
        return "save" in self.attributes or "data" in self.attributes or (
            self.value is not None and not self.is_parameter)


@dataclass
class UseStmt:
    module: str
    only: Optional[tuple] = None
    origin: Optional[Origin] = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# statements

@dataclass
class Stmt:
    pass


@dataclass
class Assign(Stmt):
    target: Expr
    value: Expr
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class PointerAssign(Stmt):
    target: Expr
    value: Expr
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Do(Stmt):
    var: str
    start: Expr
    end: Expr
    step: Optional[Expr]
    body: list
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class DoWhile(Stmt):
    cond: Expr
    body: list
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class If(Stmt):
    branches: list  # [(cond, body)]
    else_body: Optional[list] = None
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Call(Stmt):
    name: str
    args: tuple = ()
    launch: Optional[tuple] = None  # (grid, block) for CUDA kernel launches
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Return(Stmt):
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Exit(Stmt):
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Cycle(Stmt):
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Print(Stmt):
    fmt: Optional[Expr]  # None for list-directed ``*``
    items: tuple = ()
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class IOStmt(Stmt):
    kind: str
    text: str
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class ParallelRegion(Stmt):
    spec: ParallelRegionSpec
    body: list
    origin: Optional[Origin] = field(default=None, compare=False)


@dataclass
class Raw(Stmt):
    """Verbatim text produced by code generation (directives, placeholders)."""

    text: str
    origin: Optional[Origin] = field(default=None, compare=False)


def child_blocks(stmt) -> list[list]:
    if isinstance(stmt, (Do, DoWhile, ParallelRegion)):
        return [stmt.body]
    if isinstance(stmt, If):
        blocks = [b for _, b in stmt.branches]
        if stmt.else_body is not None:
            blocks.append(stmt.else_body)
        return blocks
    return []


def walk_stmts(stmts):
    """Depth-first iteration over statements, including nested bodies."""
    for s in stmts:
        yield s
        for block in child_blocks(s):
            yield from walk_stmts(block)


def stmt_exprs(stmt) -> list:
    """Expressions directly owned by a statement (not its nested bodies)."""
    if isinstance(stmt, (Assign, PointerAssign)):
        return [stmt.target, stmt.value]
    if isinstance(stmt, Do):
        return [e for e in (stmt.start, stmt.end, stmt.step) if e is not None]
    if isinstance(stmt, DoWhile):
        return [stmt.cond]
    if isinstance(stmt, If):
        return [c for c, _ in stmt.branches]
    if isinstance(stmt, Call):
        extra = list(stmt.launch) if stmt.launch else []
        return list(stmt.args) + extra
    if isinstance(stmt, Print):
        return [e for e in (stmt.fmt, *stmt.items) if e is not None]
    return []


# ---------------------------------------------------------------------------
# program units

@dataclass
class RoutineDecl:
    name: str
    params: tuple = ()
    specs: list = field(default_factory=list)
    uses: list = field(default_factory=list)
    domain_blocks: list = field(default_factory=list)
    body: list = field(default_factory=list)
    module: Optional[str] = None
    prefix: Optional[str] = None  # "global" / "device" for CUDA attributes
    scheme: Optional[str] = None
    implicit_none: bool = False
    origin: Optional[Origin] = field(default=None, compare=False)
    spec_directives: list = field(default_factory=list)  # generated sentinel lines after the specs

    def spec(self, name: str) -> Optional[SymbolSpec]:
        for s in self.specs:
            if s.name == name:
                return s
        return None

    def regions(self) -> list[ParallelRegion]:
        return [s for s in walk_stmts(self.body) if isinstance(s, ParallelRegion)]


@dataclass
class ModuleDecl:
    name: str
    specs: list = field(default_factory=list)
    uses: list = field(default_factory=list)
    domain_blocks: list = field(default_factory=list)
    routines: list = field(default_factory=list)
    implicit_none: bool = False
    path: Optional[str] = field(default=None, compare=False)
    origin: Optional[Origin] = field(default=None, compare=False)

    def spec(self, name: str) -> Optional[SymbolSpec]:
        for s in self.specs:
            if s.name == name:
                return s
        return None

    def routine(self, name: str) -> Optional[RoutineDecl]:
        for r in self.routines:
            if r.name == name:
                return r
        return None


@dataclass
class Program:
    modules: list = field(default_factory=list)
    routines: list = field(default_factory=list)  # routines outside any module

    def all_routines(self) -> list[RoutineDecl]:
        out = []
        for m in self.modules:
            out.extend(m.routines)
        out.extend(self.routines)
        return out

    def routine(self, name: str) -> Optional[RoutineDecl]:
        for r in self.all_routines():
            if r.name == name:
                return r
        return None

    def module(self, name: str) -> Optional[ModuleDecl]:
        for m in self.modules:
            if m.name == name:
                return m
        return None
