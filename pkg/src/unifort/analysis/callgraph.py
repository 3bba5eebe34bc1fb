"""Static call graph and per-architecture routine coloring."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..diagnostics import Diagnostic, Origin, TranspileError
from ..frontend.ast import Call, ParallelRegion, Program, child_blocks

UNAFFECTED = "unaffected"
KERNEL_CALLER = "kernel-caller"
KERNEL = "kernel"
INSIDE_KERNEL = "inside-kernel"
COLORS = (UNAFFECTED, KERNEL_CALLER, KERNEL, INSIDE_KERNEL)

INTRINSICS = frozenset({
    "modulo", "mod", "ceiling", "floor", "real", "dble", "int", "nint", "abs", "min", "max", "sqrt",
    "exp", "log", "sin", "cos", "tan", "sign", "dim3", "lbound", "ubound", "size", "sum", "huge",
    "tiny", "epsilon", "present",
})
DEFAULT_EXTERNALS = frozenset({"write_data"})


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    origin: Optional[Origin]
    region: Optional[int] = None  # index of the enclosing parallel region in the caller
    region_applies: frozenset = frozenset()
    external: bool = False

    def inside_region_for(self, arch: str) -> bool:
        return self.region is not None and arch in self.region_applies


@dataclass
class CallGraph:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    region_archs: dict = field(default_factory=dict)  # routine -> set of archs with a region

    def internal_edges(self) -> list[CallEdge]:
        return [e for e in self.edges if not e.external]

    def callees(self, name: str) -> list[str]:
        out = []
        for e in self.internal_edges():
            if e.caller == name and e.callee not in out:
                out.append(e.callee)
        return out

    def callers(self, name: str) -> list[str]:
        out = []
        for e in self.internal_edges():
            if e.callee == name and e.caller not in out:
                out.append(e.caller)
        return out

    def reachable(self, start: Iterable[str]) -> set[str]:
        seen = set()
        todo = deque(start)
        while todo:
            n = todo.popleft()
            if n in seen:
                continue
            seen.add(n)
            todo.extend(self.callees(n))
        return seen

    def on_cycle(self, name: str) -> bool:
        return name in self.reachable(self.callees(name))

    def copy(self) -> "CallGraph":
        return CallGraph(list(self.nodes), list(self.edges), {k: set(v) for k, v in self.region_archs.items()})


def _collect_calls(stmts, caller, region_idx, applies, counter, edges, known, externals, diags, archs):
    for s in stmts:
        if isinstance(s, ParallelRegion):
            idx = counter[0]
            counter[0] += 1
            archs.update(s.spec.applies_to)
            _collect_calls(s.body, caller, idx, s.spec.applies_to, counter, edges, known, externals, diags, archs)
            continue
        if isinstance(s, Call) and s.launch is None:
            if s.name in known:
                edges.append(CallEdge(caller, s.name, s.origin, region_idx, frozenset(applies)))
            elif s.name in externals or s.name in INTRINSICS:
                edges.append(CallEdge(caller, s.name, s.origin, region_idx, frozenset(applies), external=True))
            else:
                diags.append(Diagnostic("undefined-routine", f"call to undefined routine {s.name}", s.origin))
        for block in child_blocks(s):
            _collect_calls(block, caller, region_idx, applies, counter, edges, known, externals, diags, archs)


def build_callgraph(program: Program, externals: Iterable[str] = DEFAULT_EXTERNALS) -> CallGraph:
    externals = frozenset(externals)
    routines = program.all_routines()
    known = {r.name for r in routines}
    graph = CallGraph(nodes=[r.name for r in routines])
    diags: list[Diagnostic] = []
    for r in routines:
        archs: set = set()
        _collect_calls(r.body, r.name, None, frozenset(), [0], graph.edges, known, externals, diags, archs)
        graph.region_archs[r.name] = archs
    if diags:
        raise TranspileError(diags)
    return graph


def color_callgraph(graph: CallGraph, arch: str, strict: bool = True):
    """Return routine -> color for one architecture.

    With ``strict`` the first inconsistency raises; otherwise the diagnostics
    are returned alongside the colors.
    """
    arch = arch.lower()
    kernels = {n for n in graph.nodes if arch in graph.region_archs.get(n, ())}
    seeds = [e.callee for e in graph.internal_edges() if e.inside_region_for(arch)]
    inside = graph.reachable(seeds)
    diags = []
    for e in graph.internal_edges():
        entering = e.inside_region_for(arch) or e.caller in inside
        if entering and e.callee in kernels:
            diags.append(Diagnostic(
                "kernel-calls-kernel",
                f"{e.callee} contains a parallel region for {arch.upper()} but is called from inside one",
                e.origin))
    for n in sorted(inside - kernels):
        outside_calls = [e for e in graph.internal_edges()
                         if e.callee == n and not e.inside_region_for(arch) and e.caller not in inside]
        if outside_calls:
            diags.append(Diagnostic(
                "ambiguous-position",
                f"{n} is called both inside and outside of {arch.upper()} parallel regions",
                outside_calls[0].origin))
    colors = {}
    for n in graph.nodes:
        if n in kernels:
            colors[n] = KERNEL
        elif n in inside:
            colors[n] = INSIDE_KERNEL
        elif graph.reachable(graph.callees(n)) & kernels:
            colors[n] = KERNEL_CALLER
        else:
            colors[n] = UNAFFECTED
    if strict:
        if diags:
            raise TranspileError(diags)
        return colors
    return colors, diags


def to_dot(graph: CallGraph, colors: dict, arch: str) -> str:
    lines = [f"digraph callgraph_{arch.lower()} {{"]
    for n in graph.nodes:
        lines.append(f'  "{n}" [label="{n} [{colors[n]}]"];')
    seen = set()
    for e in graph.internal_edges():
        key = (e.caller, e.callee)
        if key in seen:
            continue
        seen.add(key)
        lines.append(f'  "{e.caller}" -> "{e.callee}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
