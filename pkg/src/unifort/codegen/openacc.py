"""OpenACC backend: regions become annotated loop nests on the device."""

from __future__ import annotations

from ..analysis.callgraph import INSIDE_KERNEL, KERNEL, KERNEL_CALLER
from ..frontend.ast import Do, ParallelRegion, Raw
from .base import Backend
from .transfers import DEVICE_LOCAL, PER_KERNEL, TRANSFER_HERE, generate_transfers


class OpenACCBackend(Backend):
    name = "openacc"
    architecture = "gpu"

    def prepare(self, ctx) -> None:
        super().prepare(ctx)
        if ctx.color == INSIDE_KERNEL:
            ctx.spec_directives.append(Raw("!$acc routine seq", ctx.decl.origin))
            return
        if ctx.color not in (KERNEL, KERNEL_CALLER):
            return
        used = []
        for region in ctx.decl.regions():
            if region.spec.applies(self.arch):
                for n in self.arrays_used(region.body, ctx):
                    if n not in used:
                        used.append(n)
        order = used + [n for n in ctx.scope if n not in used]
        records = [(ctx.scope[n], ctx.final_rank(n)) for n in order]
        ctx.state["plan"] = generate_transfers(ctx.name, ctx.color, records, used, self.diagnostics,
                                               ctx.decl.params)

    def _plan(self, ctx):
        return ctx.state.get("plan")

    def _moving(self, ctx) -> list:
        plan = self._plan(ctx)
        if not plan:
            return []
        return [t for t in plan.transfers if t.mode in (TRANSFER_HERE, PER_KERNEL, DEVICE_LOCAL)]

    def prologue(self, ctx) -> list:
        moving = self._moving(ctx)
        if not moving:
            return []
        copyin = [t.name for t in moving if t.copy_in]
        create = [t.name for t in moving if not t.copy_in]
        clauses = []
        if copyin:
            clauses.append(f"copyin({', '.join(copyin)})")
        if create:
            clauses.append(f"create({', '.join(create)})")
        return [Raw("!$acc enter data " + " ".join(clauses), ctx.decl.origin)]

    def epilogue(self, ctx) -> list:
        moving = self._moving(ctx)
        if not moving:
            return []
        copyout = [t.name for t in moving if t.copy_out]
        delete = [t.name for t in moving if not t.copy_out]
        clauses = []
        if copyout:
            clauses.append(f"copyout({', '.join(copyout)})")
        if delete:
            clauses.append(f"delete({', '.join(delete)})")
        return [Raw("!$acc exit data " + " ".join(clauses), ctx.decl.origin)]

    def before_return(self, ctx) -> list:
        return self.epilogue(ctx)

    def sequential_loop(self, loop: Do, ctx) -> list:
        if ctx.state.get("in_kernel"):
            return [Raw("!$acc loop seq", loop.origin), loop]
        return [loop]

    def emit_region(self, region: ParallelRegion, ctx) -> list:
        if not region.spec.applies(self.arch):
            return self.region_body(region, ctx)
        ctx.state["in_kernel"] = True
        try:
            body = self.region_body(region, ctx)
        finally:
            ctx.state["in_kernel"] = False
        self.check_reductions(region, ctx)
        plan = self._plan(ctx)
        present, copy = [], []
        for n in self.arrays_used(region.body, ctx):
            rec = ctx.scope[n]
            t = plan.get(n) if plan else None
            if t is not None or "present" in rec.flags:
                present.append(n)
            else:
                copy.append(n)
        clauses = ""
        if present:
            clauses += f" present({', '.join(present)})"
        if copy:
            clauses += f" copy({', '.join(copy)})"
        for op, sym in region.spec.reductions:
            clauses += f" reduction({op}:{sym})"
        vector = self.config.block_for(region.spec.template)[0]
        n = len(region.spec.domains)
        origin = region.spec.origin or region.origin
        before = {}
        if n == 1:
            before[0] = [Raw(f"!$acc parallel loop gang vector({vector}){clauses}", origin)]
        else:
            before[0] = [Raw(f"!$acc parallel loop gang{clauses}", origin)]
            for depth in range(1, n - 1):
                before[depth] = [Raw("!$acc loop", origin)]
            before[n - 1] = [Raw(f"!$acc loop vector({vector})", origin)]
        return self.loop_nest(region, body, ctx, before)

