"""Pretty-printer for the syntax tree.

Parentheses are inserted from operator precedence so that re-parsing the
output yields an equal tree.
"""

from __future__ import annotations

from typing import Optional

from .ast import (
    DOMAIN_FLAGS,
    Apply,
    Assign,
    BinOp,
    Call,
    Component,
    Cycle,
    Dim,
    Do,
    DomainDependantSpec,
    DoWhile,
    Exit,
    If,
    IOStmt,
    Logical,
    Macro,
    ModuleDecl,
    Name,
    Num,
    ParallelRegion,
    ParallelRegionSpec,
    PointerAssign,
    Print,
    Program,
    Raw,
    Return,
    RoutineDecl,
    Slice,
    Str,
    SymbolSpec,
    UnOp,
)
from .expr import BINARY, NOT_LEVEL, UNARY_LEVEL

INDENT = "  "
_DOTTED = {"==": ".eq.", "/=": ".ne.", "<": ".lt.", "<=": ".le.", ">": ".gt.", ">=": ".ge."}
_RIGHT_ASSOC = {"**"}


def _level(e) -> int:
    if isinstance(e, BinOp):
        return BINARY[e.op]
    if isinstance(e, UnOp):
        return NOT_LEVEL if e.op == ".not." else UNARY_LEVEL
    return 100


def print_expr(e) -> str:
    if isinstance(e, Num):
        return e.text
    if isinstance(e, Str):
        return "'" + e.value.replace("'", "''") + "'"
    if isinstance(e, Logical):
        return ".true." if e.value else ".false."
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Slice):
        lo = print_expr(e.lower) if e.lower is not None else ""
        hi = print_expr(e.upper) if e.upper is not None else ""
        return f"{lo}:{hi}"
    if isinstance(e, (Apply, Macro)):
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Component):
        return f"{print_expr(e.base)}%{e.field}"
    if isinstance(e, UnOp):
        inner = print_expr(e.operand)
        # the operand binds at the next level up; wrap anything weaker
        if _level(e.operand) <= _level(e):
            inner = f"({inner})"
        sep = " " if e.op == ".not." else ""
        return f"{e.op}{sep}{inner}"
    if isinstance(e, BinOp):
        level = BINARY[e.op]
        left = print_expr(e.left)
        right = print_expr(e.right)
        ll, rl = _level(e.left), _level(e.right)
        if ll < level or (ll == level and e.op in _RIGHT_ASSOC) or (isinstance(e.left, UnOp) and level > UNARY_LEVEL):
            left = f"({left})"
        if rl < level or (rl == level and e.op not in _RIGHT_ASSOC) or isinstance(e.right, UnOp):
            right = f"({right})"
        if e.op == "**":
            return f"{left}**{right}"
        op = _DOTTED.get(e.op, e.op)
        return f"{left} {op} {right}"
    raise TypeError(f"cannot print {e!r}")


def print_dims(dims, macro: Optional[str] = None) -> str:
    parts = []
    for d in dims:
        if d.upper is None:
            parts.append(":")
        elif isinstance(d.lower, Num) and d.lower.text == "1":
            parts.append(print_expr(d.upper))
        else:
            parts.append(f"{print_expr(d.lower)}:{print_expr(d.upper)}")
    inner = ", ".join(parts)
    return f"{macro}({inner})" if macro else inner


TYPE_NAMES = {
    "real8": "real(8)", "real4": "real", "integer4": "integer(4)", "integer8": "integer(8)",
    "logical": "logical", "character": "character(len=*)",
}


def type_name(base: str) -> str:
    return TYPE_NAMES.get(base, f"type({base})")


def print_spec(s: SymbolSpec) -> str:
    attrs = [type_name(s.base_type)]
    if s.intent != "none":
        attrs.append(f"intent({s.intent})")
    if s.is_pointer:
        attrs.append("pointer")
    if s.is_parameter:
        attrs.append("parameter")
    attrs.extend(sorted(a for a in s.attributes if a != "data"))
    entity = s.name
    if s.dimensions:
        entity += f"({print_dims(s.dimensions, s.dom_macro)})"
    if s.value is not None:
        entity += (" => " if s.is_pointer else " = ") + print_expr(s.value)
    return f"{', '.join(attrs)} :: {entity}"


def _size_text(lower, upper) -> str:
    if isinstance(lower, Num) and lower.text == "1":
        return print_expr(upper)
    return f"{print_expr(lower)}:{print_expr(upper)}"


def print_region_spec(spec: ParallelRegionSpec) -> str:
    parts = []
    archs = [a.upper() for a in ("cpu", "gpu") if a in spec.applies_to]
    parts.append(f"appliesTo({', '.join(archs)})")
    parts.append(f"domName({', '.join(d.name for d in spec.domains)})")
    parts.append(f"domSize({', '.join(_size_text(d.lower, d.upper) for d in spec.domains)})")
    parts.append(f"startAt({', '.join(print_expr(d.start) for d in spec.domains)})")
    parts.append(f"endAt({', '.join(print_expr(d.end) for d in spec.domains)})")
    if spec.reductions:
        parts.append(f"reduction({', '.join(f'{op}:{sym}' for op, sym in spec.reductions)})")
    if spec.template:
        parts.append(f"template({spec.template})")
    return "@parallelRegion{" + ", ".join(parts) + "}"


def print_domain_block(spec: DomainDependantSpec, indent: str = "") -> list[str]:
    parts = []
    if spec.domains:
        parts.append(f"domName({', '.join(d.name for d in spec.domains)})")
        parts.append(f"domSize({', '.join(_size_text(d.lower, d.upper) for d in spec.domains)})")
    if spec.acc_pp:
        parts.append(f"accPP({spec.acc_pp})")
    if spec.dom_pp:
        parts.append(f"domPP({spec.dom_pp})")
    flags = [f for f in DOMAIN_FLAGS if f in spec.flags]
    if flags:
        parts.append(f"attribute({', '.join(flags)})")
    return [
        indent + "@domainDependant{" + ", ".join(parts) + "}",
        indent + ", ".join(spec.symbols),
        indent + "@end domainDependant",
    ]


def print_stmt(s, indent: str = "") -> list[str]:
    inner = indent + INDENT
    if isinstance(s, Assign):
        return [f"{indent}{print_expr(s.target)} = {print_expr(s.value)}"]
    if isinstance(s, PointerAssign):
        return [f"{indent}{print_expr(s.target)} => {print_expr(s.value)}"]
    if isinstance(s, Do):
        head = f"{indent}do {s.var} = {print_expr(s.start)}, {print_expr(s.end)}"
        if s.step is not None:
            head += f", {print_expr(s.step)}"
        return [head, *print_block(s.body, inner), f"{indent}end do"]
    if isinstance(s, DoWhile):
        return [f"{indent}do while ({print_expr(s.cond)})", *print_block(s.body, inner), f"{indent}end do"]
    if isinstance(s, If):
        out = []
        for idx, (cond, body) in enumerate(s.branches):
            kw = "if" if idx == 0 else "else if"
            out.append(f"{indent}{kw} ({print_expr(cond)}) then")
            out.extend(print_block(body, inner))
        if s.else_body is not None:
            out.append(f"{indent}else")
            out.extend(print_block(s.else_body, inner))
        out.append(f"{indent}end if")
        return out
    if isinstance(s, Call):
        text = f"{indent}call {s.name}"
        if s.launch:
            text += f" <<< {print_expr(s.launch[0])}, {print_expr(s.launch[1])} >>>"
        text += f"({', '.join(print_expr(a) for a in s.args)})"
        return [text]
    if isinstance(s, Return):
        return [f"{indent}return"]
    if isinstance(s, Exit):
        return [f"{indent}exit"]
    if isinstance(s, Cycle):
        return [f"{indent}cycle"]
    if isinstance(s, Print):
        fmt = "*" if s.fmt is None else print_expr(s.fmt)
        items = "".join(f", {print_expr(i)}" for i in s.items)
        return [f"{indent}print {fmt}{items}"]
    if isinstance(s, IOStmt):
        return [f"{indent}{s.text}"]
    if isinstance(s, ParallelRegion):
        return [f"{indent}{print_region_spec(s.spec)}", *print_block(s.body, inner), f"{indent}@end parallelRegion"]
    if isinstance(s, Raw):
        return [line if not line.strip() else indent + line for line in s.text.split("\n")]
    raise TypeError(f"cannot print statement {s!r}")


def print_block(stmts, indent: str = "") -> list[str]:
    out = []
    for s in stmts:
        out.extend(print_stmt(s, indent))
    return out


def print_routine(r: RoutineDecl, indent: str = "") -> list[str]:
    inner = indent + INDENT
    prefix = f"attributes({r.prefix}) " if r.prefix else ""
    out = [f"{indent}{prefix}subroutine {r.name}({', '.join(r.params)})"]
    for u in r.uses:
        out.append(inner + _use_text(u))
    if r.implicit_none:
        out.append(f"{inner}implicit none")
    for s in r.specs:
        out.append(inner + print_spec(s))
    for d in r.domain_blocks:
        out.extend(print_domain_block(d, inner))
    out.extend(print_block(r.spec_directives, inner))
    out.extend(print_block(r.body, inner))
    out.append(f"{indent}end subroutine")
    return out


def _use_text(u) -> str:
    if u.only is None:
        return f"use {u.module}"
    return f"use {u.module}, only: {', '.join(u.only)}"


def _print_routines(routines, indent: str) -> list[str]:
    out = []
    current = None
    for r in routines:
        if r.scheme != current:
            if current is not None:
                out.append(f"{indent}@end scheme")
            if r.scheme is not None:
                out.append(f"{indent}@scheme{{{r.scheme}}}")
            current = r.scheme
        out.extend(print_routine(r, indent))
        out.append("")
    if current is not None:
        out.append(f"{indent}@end scheme")
    return out


def print_module(m: ModuleDecl) -> list[str]:
    out = [f"module {m.name}"]
    for u in m.uses:
        out.append(INDENT + _use_text(u))
    if m.implicit_none:
        out.append(f"{INDENT}implicit none")
    for s in m.specs:
        out.append(INDENT + print_spec(s))
    for d in m.domain_blocks:
        out.extend(print_domain_block(d, INDENT))
    if m.routines:
        out.append("contains")
        out.extend(_print_routines(m.routines, INDENT))
    out.append("end module")
    return out


def print_program(p: Program) -> str:
    out = []
    for m in p.modules:
        out.extend(print_module(m))
        out.append("")
    out.extend(_print_routines(p.routines, ""))
    return "\n".join(out).rstrip("\n") + "\n" if out else ""
