"""Host/device transfer planning for GPU targets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..analysis.callgraph import KERNEL, KERNEL_CALLER
from ..diagnostics import Diagnostic

PRESENT = "present"
TRANSFER_HERE = "transferHere"
PER_KERNEL = "kernel"
DEVICE_LOCAL = "device-local"

MIRROR_SUFFIX = "_hfdev"


@dataclass(frozen=True)
class Transfer:
    name: str
    mode: str
    copy_in: bool = False
    copy_out: bool = False
    zero_init: bool = False

    @property
    def mirror(self) -> Optional[str]:
        if self.mode in (TRANSFER_HERE, PER_KERNEL):
            return self.name + MIRROR_SUFFIX
        return None

    @property
    def moves_data(self) -> bool:
        return self.copy_in or self.copy_out


@dataclass
class TransferPlan:
    routine: str
    transfers: list

    def get(self, name: str) -> Optional[Transfer]:
        for t in self.transfers:
            if t.name == name:
                return t
        return None

    @property
    def mirrored(self) -> list:
        return [t for t in self.transfers if t.mirror]

    def __bool__(self):
        return bool(self.transfers)


def _by_intent(name: str, intent: str, mode: str) -> Transfer:
    if intent == "none":
        intent = "inout"  # unknown direction: move both ways
    return Transfer(name, mode,
                    copy_in=intent in ("in", "inout"),
                    copy_out=intent in ("out", "inout"),
                    zero_init=intent == "out")


def generate_transfers(routine: str, color: str, records: list, kernel_arrays, diags: list,
                       params=()) -> TransferPlan:
    """Transfer plan for one GPU routine.

    ``records`` holds (record, final rank) pairs for the routine's visible
    symbols, ``kernel_arrays`` the array names used inside its kernels.
    Only non-scalar symbols take part; scalars travel by value. Locals used
    only on the device get device storage without copies.
    """
    kernel_arrays = list(kernel_arrays)
    out = []
    if color not in (KERNEL, KERNEL_CALLER):
        return TransferPlan(routine, out)
    for rec, final_rank in records:
        if final_rank == 0:
            continue
        flags = rec.flags
        if "present" in flags:
            if rec.name in kernel_arrays or rec.scope == routine:
                out.append(Transfer(rec.name, PRESENT))
            continue
        if "transferHere" in flags and rec.scope == routine:
            out.append(_by_intent(rec.name, rec.intent, TRANSFER_HERE))
            continue
        if color != KERNEL or rec.name not in kernel_arrays:
            continue
        if rec.owner == routine and rec.intent == "none" and rec.name not in params:
            out.append(Transfer(rec.name, DEVICE_LOCAL))
            continue
        if rec.intent == "none":
            diags.append(Diagnostic(
                "untracked-device-state",
                f"{rec.name} is used in a kernel of {routine} but has neither an intent nor a present/transferHere flag",
                rec.spec.origin))
            continue
        out.append(_by_intent(rec.name, rec.intent, PER_KERNEL))
    return TransferPlan(routine, out)

