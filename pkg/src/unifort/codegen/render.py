"""Printing with per-line provenance."""

from __future__ import annotations

from ..frontend.ast import Do, DoWhile, If, ModuleDecl, Program, RoutineDecl
from ..frontend.printer import INDENT, print_expr, print_spec, print_stmt


def render_block(stmts, indent: str, default=None) -> list:
    out = []
    for s in stmts:
        origin = getattr(s, "origin", None) or default
        inner = indent + INDENT
        if isinstance(s, Do):
            head = f"{indent}do {s.var} = {print_expr(s.start)}, {print_expr(s.end)}"
            if s.step is not None:
                head += f", {print_expr(s.step)}"
            out.append((head, origin))
            out.extend(render_block(s.body, inner, origin))
            out.append((f"{indent}end do", origin))
        elif isinstance(s, DoWhile):
            out.append((f"{indent}do while ({print_expr(s.cond)})", origin))
            out.extend(render_block(s.body, inner, origin))
            out.append((f"{indent}end do", origin))
        elif isinstance(s, If):
            for idx, (cond, body) in enumerate(s.branches):
                kw = "if" if idx == 0 else "else if"
                out.append((f"{indent}{kw} ({print_expr(cond)}) then", origin))
                out.extend(render_block(body, inner, origin))
            if s.else_body is not None:
                out.append((f"{indent}else", origin))
                out.extend(render_block(s.else_body, inner, origin))
            out.append((f"{indent}end if", origin))
        else:
            out.extend((line, origin) for line in print_stmt(s, indent))
    return out


def render_routine(r: RoutineDecl, indent: str = "") -> list:
    inner = indent + INDENT
    prefix = f"attributes({r.prefix}) " if r.prefix else ""
    out = [(f"{indent}{prefix}subroutine {r.name}({', '.join(r.params)})", r.origin)]
    for u in r.uses:
        out.append((inner + _use_text(u), u.origin or r.origin))
    if r.implicit_none:
        out.append((f"{inner}implicit none", r.origin))
    for s in r.specs:
        out.append((inner + print_spec(s), s.origin or r.origin))
    out.extend(render_block(r.spec_directives, inner, r.origin))
    out.extend(render_block(r.body, inner, r.origin))
    out.append((f"{indent}end subroutine", r.origin))
    return out


def _use_text(u) -> str:
    if u.only is None:
        return f"use {u.module}"
    return f"use {u.module}, only: {', '.join(u.only)}"


def render_module(m: ModuleDecl) -> list:
    out = [(f"module {m.name}", m.origin)]
    for u in m.uses:
        out.append((INDENT + _use_text(u), u.origin or m.origin))
    if m.implicit_none:
        out.append((f"{INDENT}implicit none", m.origin))
    for s in m.specs:
        out.append((INDENT + print_spec(s), s.origin or m.origin))
    if m.routines:
        out.append(("contains", m.origin))
        for r in m.routines:
            out.extend(render_routine(r, INDENT))
            out.append(("", None))
    out.append(("end module", m.origin))
    return out


def render_program(p: Program) -> list:
    out = []
    for m in p.modules:
        out.extend(render_module(m))
        out.append(("", None))
    for r in p.routines:
        out.extend(render_routine(r))
        out.append(("", None))
    while out and out[-1][0] == "":
        out.pop()
    return out


