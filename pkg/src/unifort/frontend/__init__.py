"""Parsing of the Fortran subset and the Hybrid directives."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Union

from ..source import MacroTable, RawSource, merge_continuations, preprocess
from .ast import Program
from .directives import parse_directive
from .parser import parse_program
from .printer import print_program

__all__ = ["parse_directive", "parse_program", "print_program", "load_program", "parse_text"]


def _prepare(source: RawSource, table: Optional[MacroTable]):
    if source.kind.has_macros:
        source = preprocess(source, table)
    return merge_continuations(source)


def load_program(sources: Iterable[Union[str, Path, RawSource]], table: Optional[MacroTable] = None,
                 macro_names: Iterable[str] = ()) -> Program:
    """Run the front half of the pipeline (macros, merging, parsing) over files."""
    streams = []
    for src in sources:
        if not isinstance(src, RawSource):
            src = RawSource.read(src)
        streams.append(_prepare(src, table))
    return parse_program(streams, macro_names)


def parse_text(text: str, path: str = "<string>.h90", macro_names: Iterable[str] = ()) -> Program:
    return load_program([RawSource.from_text(text, path)], macro_names=macro_names)
