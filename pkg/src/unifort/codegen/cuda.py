"""CUDA Fortran backend: regions are outlined into global kernels."""

from __future__ import annotations

import dataclasses

from ..analysis.callgraph import INSIDE_KERNEL, KERNEL, KERNEL_CALLER
from ..diagnostics import Diagnostic
from ..frontend.ast import (
    Apply,
    Assign,
    BinOp,
    Call,
    Component,
    Do,
    If,
    Name,
    ParallelRegion,
    Raw,
    Return,
    RoutineDecl,
    Slice,
    SymbolSpec,
    UnOp,
    UseStmt,
    base_name,
    stmt_exprs,
    walk_stmts,
)
from .base import Backend, names_in
from .exprutil import conjunction, disjunction, extent, num, simplify
from .transfers import DEVICE_LOCAL, PRESENT, TRANSFER_HERE, generate_transfers

AXES = "xyz"
GRID_VARS = ("cugridSizeX", "cugridSizeY", "cugridSizeZ")
ERROR_PLACEHOLDER = "! kernel launch error handling goes here"


def kernel_name(index: int, routine: str) -> str:
    return f"hfk{index}_{routine}"


class CudaBackend(Backend):
    name = "cuda"
    architecture = "gpu"

    def module_uses(self) -> list:
        return [UseStmt("cudafor")]

    def routine_uses(self, ctx) -> list:
        if ctx.decl.module is None and ctx.color in (KERNEL, KERNEL_CALLER, INSIDE_KERNEL):
            return [UseStmt("cudafor")]
        return []

    def routine_prefix(self, ctx):
        return "device" if ctx.color == INSIDE_KERNEL else None

    def iterator_param_spec(self, name: str, ctx) -> SymbolSpec:
        return SymbolSpec(name, "integer4", attributes=frozenset({"value"}), origin=ctx.decl.origin)

    # -- transfers ------------------------------------------------------

    def kernel_arrays(self, ctx) -> list:
        out = []
        for region in ctx.decl.regions():
            if region.spec.applies(self.arch):
                for n in self.arrays_used(region.body, ctx):
                    if n not in out:
                        out.append(n)
        return out

    def prepare(self, ctx) -> None:
        super().prepare(ctx)
        ctx.state["kernel_index"] = {id(r): i for i, r in enumerate(ctx.decl.regions())}
        if ctx.color not in (KERNEL, KERNEL_CALLER):
            return
        used = self.kernel_arrays(ctx)
        for n in used:
            rec = ctx.scope[n]
            if rec.directive is None:
                self.diagnostics.append(Diagnostic(
                    "not-domain-dependant",
                    f"array {n} is used in a GPU kernel of {ctx.name} but is not declared domain dependant",
                    rec.spec.origin))
        order = used + [n for n in ctx.scope if n not in used]
        records = [(ctx.scope[n], ctx.final_rank(n)) for n in order]
        plan = generate_transfers(ctx.name, ctx.color, records, used, self.diagnostics, ctx.decl.params)
        ctx.state["plan"] = plan
        for t in plan.mirrored:
            rec = ctx.scope[t.name]
            lay = ctx.layout(t.name)
            dims = lay.dims if lay is not None else rec.spec.dimensions
            if any(d.deferred for d in dims):
                self.diagnostics.append(Diagnostic(
                    "deferred-shape-transfer",
                    f"{t.name} has deferred shape; a device mirror needs explicit bounds "
                    f"(pass it to a routine with explicit-shape dummies or mark it present)",
                    rec.spec.origin))
                continue
            ctx.extra_specs.append(SymbolSpec(
                t.mirror, rec.spec.base_type, dims, attributes=frozenset({"device"}),
                dom_macro=lay.dom if lay is not None and lay.wrapped else None, origin=rec.spec.origin))

    def _plan(self, ctx):
        return ctx.state.get("plan")

    def transform_spec(self, spec: SymbolSpec, ctx) -> SymbolSpec:
        spec = super().transform_spec(spec, ctx)
        plan = self._plan(ctx)
        t = plan.get(spec.name) if plan else None
        if t is not None and t.mode in (PRESENT, DEVICE_LOCAL):
            spec = dataclasses.replace(spec, attributes=spec.attributes | {"device"})
        return spec

    @staticmethod
    def _whole(name: str, rank: int):
        return Apply(name, tuple(Slice() for _ in range(rank)))

    def _guarded_copy(self, t, ctx, inbound: bool) -> list:
        lay = ctx.layout(t.name)
        rec = ctx.scope[t.name]
        dims = lay.dims if lay is not None else rec.spec.dimensions
        rank = len(dims)
        host, dev = self._whole(t.name, rank), self._whole(t.mirror, rank)
        copy = Assign(dev, host) if inbound else Assign(host, dev)
        checks = [BinOp(">", extent(d.lower, d.upper), num(0)) for d in dims]
        return [If([(conjunction(checks), [copy])], None, rec.spec.origin)]

    def prologue(self, ctx) -> list:
        plan = self._plan(ctx)
        out = []
        if not plan:
            return out
        for t in plan.mirrored:
            if t.zero_init:
                rank = ctx.final_rank(t.name)
                out.append(Assign(self._whole(t.mirror, rank), num(0), ctx.scope[t.name].spec.origin))
        for t in plan.mirrored:
            if t.copy_in:
                out.extend(self._guarded_copy(t, ctx, True))
        return out

    def epilogue(self, ctx) -> list:
        plan = self._plan(ctx)
        out = []
        if plan:
            for t in plan.mirrored:
                if t.copy_out:
                    out.extend(self._guarded_copy(t, ctx, False))
        return out

    def before_return(self, ctx) -> list:
        return self.epilogue(ctx)

    def call_argument(self, arg, ctx):
        plan = self._plan(ctx)
        if not plan or ctx.region_depth > 0:
            return arg
        base = base_name(arg)
        t = plan.get(base) if base else None
        if t is None or t.mode != TRANSFER_HERE or t.mirror is None:
            return arg
        if isinstance(arg, Name):
            return Name(t.mirror)
        if isinstance(arg, Apply):
            return Apply(t.mirror, arg.args)
        return arg

    # -- kernels --------------------------------------------------------

    def emit_region(self, region: ParallelRegion, ctx) -> list:
        body = self.region_body(region, ctx)
        if not region.spec.applies(self.arch):
            return body
        origin = region.spec.origin or region.origin
        if region.spec.reductions:
            self.diagnostics.append(Diagnostic(
                "reduction-unsupported",
                "reductions are only supported with the OpenACC- and OpenMP backends",
                origin))
            return []
        if len(region.spec.domains) > 3:
            self.diagnostics.append(Diagnostic(
                "too-many-domains", "CUDA kernels support at most three parallel domains", origin))
            return []
        index = ctx.state["kernel_index"][id(region)]
        name = kernel_name(index, ctx.name)
        scalars, arrays, locals_ = self._signature(region, body, ctx)
        ctx.extra_routines.append(self._kernel(name, region, body, scalars, arrays, locals_, ctx))
        return self._launch(name, region, scalars, arrays, ctx)

    def _signature(self, region, body, ctx):
        iters = region.spec.domain_names
        loop_vars = {s.var for s in walk_stmts(body) if isinstance(s, Do)}
        assigned = {base_name(s.target) for s in walk_stmts(body) if isinstance(s, Assign)}
        scalars, arrays, locals_ = [], [], []
        seen = set(iters)

        def consider(n):
            if n in seen:
                return
            seen.add(n)
            rec = ctx.scope.get(n)
            if rec is None:
                return
            if ctx.is_array(n):
                arrays.append(n)
            elif rec.spec.is_parameter or n in loop_vars or (
                    n in assigned and rec.owner == ctx.name and n not in ctx.decl.params):
                locals_.append(n)
            else:
                scalars.append(n)

        exprs = [e for s in walk_stmts(body) for e in stmt_exprs(s)]
        for n in names_in(exprs):
            consider(n)
        for d in region.spec.domains:
            for n in names_in([d.start, d.end]):
                consider(n)
        for a in list(arrays):
            lay = ctx.layout(a)
            dims = lay.dims if lay is not None else ctx.scope[a].spec.dimensions
            for n in names_in([x for d in dims for x in (d.lower, d.upper) if x is not None]):
                consider(n)
        for n in locals_:
            spec = ctx.scope[n].spec
            for n2 in names_in([x for d in spec.dimensions for x in (d.lower, d.upper) if x is not None]):
                consider(n2)
        return scalars, arrays, locals_

    def _kernel(self, name, region, body, scalars, arrays, locals_, ctx) -> RoutineDecl:
        origin = region.spec.origin or region.origin
        specs = []
        for n in scalars:
            spec = ctx.scope[n].spec
            specs.append(dataclasses.replace(spec, intent="none", is_pointer=False, value=None,
                                             attributes=frozenset({"value"}), dimensions=()))
        for n in arrays:
            spec = Backend.transform_spec(self, ctx.scope[n].spec, ctx)
            specs.append(dataclasses.replace(spec, intent="none", is_pointer=False, value=None,
                                             attributes=frozenset({"device"})))
        for n in locals_:
            spec = Backend.transform_spec(self, ctx.scope[n].spec, ctx)
            specs.append(dataclasses.replace(spec, intent="none"))
        for it in region.spec.domain_names:
            specs.append(SymbolSpec(it, "integer4", origin=origin))
        stmts = []
        for axis, d in enumerate(region.spec.domains):
            ax = AXES[axis]
            pos = BinOp("+", BinOp("*", BinOp("-", Component(Name("blockidx"), ax), num(1)),
                                   Component(Name("blockdim"), ax)),
                        Component(Name("threadidx"), ax))
            shift = simplify(BinOp("-", self.rewrite_expr(d.start, ctx), num(1)))
            if isinstance(shift, UnOp) and shift.op == "-":
                pos = BinOp("-", pos, shift.operand)
            elif shift != num(0):
                pos = BinOp("+", pos, shift)
            stmts.append(Assign(Name(d.name), pos, origin))
        guard = disjunction(BinOp(">", Name(d.name), self.rewrite_expr(d.end, ctx)) for d in region.spec.domains)
        stmts.append(If([(guard, [Return(origin)])], None, origin))
        stmts.extend(body)
        return RoutineDecl(name=name, params=tuple(scalars + arrays), specs=specs, body=stmts,
                           module=ctx.decl.module, prefix="global", implicit_none=ctx.decl.implicit_none,
                           origin=origin)

    def _launch(self, name, region, scalars, arrays, ctx) -> list:
        origin = region.spec.origin or region.origin
        if not ctx.state.get("grid_declared"):
            ctx.state["grid_declared"] = True
            ctx.extra_specs.append(SymbolSpec(GRID_VARS[0], "integer4", origin=origin))
            ctx.extra_specs.extend(SymbolSpec(v, "integer4", origin=origin) for v in GRID_VARS[1:])
            ctx.extra_specs.append(SymbolSpec("cugrid", "dim3", origin=origin))
            ctx.extra_specs.append(SymbolSpec("cublock", "dim3", origin=origin))
        block = self.config.block_for(region.spec.template)
        stmts = []
        sizes = []
        for axis in range(3):
            if axis < len(region.spec.domains):
                d = region.spec.domains[axis]
                ext = extent(self.rewrite_expr(d.start, ctx), self.rewrite_expr(d.end, ctx))
                value = Apply("ceiling", (BinOp("/", Apply("real", (ext,)), Apply("real", (num(block[axis]),))),))
                sizes.append(block[axis])
            else:
                value = num(1)
                sizes.append(1)
            stmts.append(Assign(Name(GRID_VARS[axis]), value, origin))
        stmts.append(Assign(Name("cugrid"), Apply("dim3", tuple(Name(v) for v in GRID_VARS)), origin))
        stmts.append(Assign(Name("cublock"), Apply("dim3", tuple(num(s) for s in sizes)), origin))
        plan = self._plan(ctx)
        args = [Name(n) for n in scalars]
        for n in arrays:
            t = plan.get(n) if plan else None
            args.append(Name(t.mirror if t is not None and t.mirror else n))
        stmts.append(Call(name, tuple(args), (Name("cugrid"), Name("cublock")), origin))
        stmts.append(Raw(ERROR_PLACEHOLDER, origin))
        return stmts
