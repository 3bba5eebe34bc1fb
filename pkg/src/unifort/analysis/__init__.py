"""Call graph, coloring, symbol resolution and the application model."""

from .callgraph import CallGraph, build_callgraph, color_callgraph, to_dot
from .model import ApplicationModel, build_model
from .symbols import SymbolRecord, SymbolTable, merge_domains, resolve_symbols

__all__ = [
    "ApplicationModel", "CallGraph", "SymbolRecord", "SymbolTable", "build_callgraph", "build_model",
    "color_callgraph", "merge_domains", "resolve_symbols", "to_dot",
]
