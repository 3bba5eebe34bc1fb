"""Storage-order macro definitions (AT/DOM families)."""

from __future__ import annotations

from ..source import MacroTable, Preprocessor, RawSource
from .config import MAX_RANK, TargetConfig

PARAMS = "ijklmno"
STORAGE_FILE = "storage_order.F90"


def family(rank: int) -> tuple:
    """(access macro, declaration macro) names for a rank."""
    if rank == 3:
        return "AT", "DOM"
    return f"AT{rank}", f"DOM{rank}"


def _define(name: str, rank: int, order: tuple) -> str:
    params = ",".join(PARAMS[:rank])
    body = ", ".join(PARAMS[p - 1] for p in order)
    return f"#define {name}({params}) {body}"


def storage_definitions(config: TargetConfig, aliases=None) -> str:
    """Macro text with a GPU branch and a CPU branch; ``aliases`` maps custom names to ranks."""
    lines = ["! storage order definitions", "#ifdef GPU"]
    for arch in ("gpu", "cpu"):
        if arch == "cpu":
            lines.append("#else")
        for rank in range(1, MAX_RANK + 1):
            order = config.order(arch, rank)
            for name in family(rank):
                lines.append(_define(name, rank, order))
    lines.append("#endif")
    for name, (rank, kind) in sorted((aliases or {}).items()):
        target = family(rank)[0 if kind == "acc" else 1]
        params = ",".join(PARAMS[:rank])
        lines.append(f"#define {name}({params}) {target}({params})")
    return "\n".join(lines) + "\n"


def storage_table(config: TargetConfig, aliases=None, gpu: bool = None) -> MacroTable:
    """Preprocess the definitions and return the resulting macro table."""
    gpu = config.architecture == "gpu" if gpu is None else gpu
    table = MacroTable()
    if gpu:
        table.define("GPU", "1")
    source = RawSource.from_text(storage_definitions(config, aliases), STORAGE_FILE)
    pre = Preprocessor(table)
    pre.process(source)
    return pre.table


def macro_names(aliases=None) -> set:
    names = set()
    for rank in range(1, MAX_RANK + 1):
        names.update(family(rank))
    names.update((aliases or {}).keys())
    return names


def permute(order: tuple, args: list) -> list:
    return [args[p - 1] for p in order]
