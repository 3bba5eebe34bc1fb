"""Restrictions on code that ends up inside GPU kernels."""

from __future__ import annotations

from ..analysis.callgraph import INSIDE_KERNEL, KERNEL, color_callgraph
from ..diagnostics import Diagnostic, TranspileError
from ..frontend.ast import Apply, Assign, IOStmt, Name, ParallelRegion, Slice, walk_stmts


def _is_array_expression(target, scope: dict) -> bool:
    if isinstance(target, Apply):
        return any(isinstance(a, Slice) for a in target.args)
    if isinstance(target, Name):
        rec = scope.get(target.name)
        return rec is not None and rec.is_array
    return False


def _check_statements(stmts, scope: dict, where: str) -> list[Diagnostic]:
    diags = []
    for s in walk_stmts(stmts):
        if isinstance(s, Assign) and _is_array_expression(s.target, scope):
            diags.append(Diagnostic("array-expression",
                                    f"array expression in kernel ({where}); write an explicit loop instead",
                                    s.origin))
        elif isinstance(s, IOStmt):
            diags.append(Diagnostic("io-statement",
                                    f"'{s.kind}' statement in kernel ({where}); only print is allowed",
                                    s.origin))
    return diags


def _save_symbols(names, scope: dict, routine: str) -> list:
    out = []
    for n in names:
        rec = scope.get(n)
        if rec is not None and rec.owner == routine and rec.spec.has_save and not rec.spec.is_parameter:
            out.append(rec)
    return out


def validate_kernel_body(model, arch: str = "gpu") -> list[Diagnostic]:
    """Diagnostics for every kernel-body restriction violated under ``arch``."""
    diags: list[Diagnostic] = []
    _, coloring_diags = color_callgraph(model.graph, arch, strict=False)
    diags.extend(d for d in coloring_diags if d.rule == "kernel-calls-kernel")
    colors = model.colors.get(arch) or {}
    for name, rm in model.routines.items():
        color = colors.get(name)
        decl = rm.decl
        scope = model.symbols.in_scope(name)
        if color == KERNEL:
            bodies = [r for r in decl.regions() if r.spec.applies(arch)]
            for region in bodies:
                diags.extend(_check_statements(region.body, scope, name))
                used = [u for cr in rm.regions if cr.region is region for u in cr.used_symbols]
                for rec in _save_symbols(used, scope, name):
                    diags.append(Diagnostic("save-data",
                                            f"{rec.name} has SAVE/DATA semantics and is used in a kernel of {name}",
                                            rec.spec.origin))
            if bodies and model.graph.on_cycle(name):
                diags.append(Diagnostic("recursion", f"{name} must not contain recursion", decl.origin))
        elif color == INSIDE_KERNEL:
            diags.extend(_check_statements(decl.body, scope, name))
            for rec in _save_symbols([s.name for s in decl.specs], scope, name):
                diags.append(Diagnostic("save-data",
                                        f"{rec.name} has SAVE/DATA semantics inside kernel routine {name}",
                                        rec.spec.origin))
            if model.graph.on_cycle(name):
                diags.append(Diagnostic("recursion", f"{name} must not contain recursion", decl.origin))
    return _dedupe(diags)


def _dedupe(diags):
    seen = set()
    out = []
    for d in diags:
        key = (d.rule, d.origin)
        if key not in seen:
            seen.add(key)
            out.append(d)
    return out


def check_kernels(model, arch: str = "gpu") -> None:
    diags = validate_kernel_body(model, arch)
    if diags:
        raise TranspileError(diags)
