"""Diagnostics carrying the physical source position that triggered them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

Origin = Tuple[str, int]


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    origin: Optional[Origin] = None

    def __str__(self) -> str:
        where = "<unknown>"
        if self.origin is not None:
            where = f"{self.origin[0]}:{self.origin[1]}"
        return f"{where}: [{self.rule}] {self.message}"


class TranspileError(Exception):
    """One or more diagnostics stopped a transformation phase."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        unique = []
        seen = set()
        for diag in diagnostics:
            key = (diag.rule, diag.origin)
            if key in seen:
                continue
            seen.add(key)
            unique.append(diag)
        self.diagnostics = unique
        super().__init__("\n".join(str(d) for d in unique))

    @classmethod
    def single(cls, rule: str, message: str, origin: Optional[Origin] = None) -> "TranspileError":
        return cls([Diagnostic(rule, message, origin)])


def raise_if_any(diagnostics: list[Diagnostic]) -> None:
    if diagnostics:
        raise TranspileError(diagnostics)
