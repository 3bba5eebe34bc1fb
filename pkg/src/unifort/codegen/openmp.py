"""CPU backend with OpenMP worksharing around the region loop nests."""

from __future__ import annotations

from ..frontend.ast import ParallelRegion, Raw
from .base import Backend


class OpenMPBackend(Backend):
    name = "openmp"
    architecture = "cpu"

    def emit_region(self, region: ParallelRegion, ctx) -> list:
        body = self.region_body(region, ctx)
        if not region.spec.applies(self.arch):
            return body
        self.check_reductions(region, ctx)
        # all arrays shared, every scalar private to the thread
        clauses = "default(firstprivate)"
        arrays = self.arrays_used(region.body, ctx)
        if arrays:
            clauses += f" shared({', '.join(arrays)})"
        for op, sym in region.spec.reductions:
            clauses += f" reduction({op}:{sym})"
        open_ = Raw(f"!$omp parallel do {clauses}", region.origin)
        close = Raw("!$omp end parallel do", region.origin)
        return [open_] + self.loop_nest(region, body, ctx) + [close]
