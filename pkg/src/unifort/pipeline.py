"""End-to-end transpilation: sources in, emitted units out."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from .analysis import build_model
from .analysis.callgraph import DEFAULT_EXTERNALS
from .codegen import EmittedUnit, Generated, generate
from .codegen.config import BuildConfig, TargetConfig
from .codegen.render import render_module, render_routine
from .codegen.storage import STORAGE_FILE, macro_names, storage_definitions, storage_table
from .frontend import load_program
from .source import RawSource, expand_line, split_line

SourceLike = Union[str, Path, RawSource]


@dataclass
class TranspileResult:
    units: list  # generated sources, one per input file
    storage: EmittedUnit
    model: object
    generated: Generated
    config: TargetConfig

    def unit(self, stem_or_path: str) -> EmittedUnit:
        for u in self.units:
            if u.path == stem_or_path or Path(u.path).name.startswith(stem_or_path + "."):
                return u
        raise KeyError(stem_or_path)

    @property
    def all_units(self) -> list:
        return self.units + [self.storage]


def _as_source(src: SourceLike) -> RawSource:
    return src if isinstance(src, RawSource) else RawSource.read(src)


def output_name(path: str, target: str) -> str:
    stem = Path(path).name.split(".")[0]
    return f"{stem}.{target}.f90"


def finish_lines(lines: list, config: TargetConfig, table=None) -> tuple:
    """Expand storage macros (when ``table`` is given) and split long lines.

    Returns (text, provenance) with one provenance entry per output line.
    """
    out, prov = [], []
    for text, origin in lines:
        if table is not None and not text.lstrip().startswith("!"):
            text = expand_line(text, table)
        for piece in split_line(text, config.max_line_length, True, origin):
            out.append(piece)
            prov.append(origin)
    return "\n".join(out) + "\n", prov


def transpile(sources: Iterable[SourceLike], target: Union[str, TargetConfig] = "cpu-openmp",
              build: Optional[BuildConfig] = None, externals=DEFAULT_EXTERNALS) -> TranspileResult:
    build = build or BuildConfig()
    config = target if isinstance(target, TargetConfig) else TargetConfig.for_target(target, build)
    raw = [_as_source(s) for s in sources]
    program = load_program(raw, macro_names=macro_names())
    model = build_model(program, externals=externals, default_backend=config.backend)
    generated = generate(model, config)
    table = storage_table(config, generated.aliases)

    by_file: dict = {}
    for mod in generated.program.modules:
        by_file.setdefault(mod.path or (mod.origin[0] if mod.origin else raw[0].path), []).append(
            render_module(mod) + [("", None)])
    for r in generated.program.routines:
        path = r.origin[0] if r.origin else raw[0].path
        by_file.setdefault(path, []).append(render_routine(r) + [("", None)])

    units = []
    for src in raw:
        chunks = by_file.get(src.path, [])
        lines = [item for chunk in chunks for item in chunk]
        while lines and lines[-1][0] == "":
            lines.pop()
        macro_text, _ = finish_lines(lines, config)
        text, prov = finish_lines(lines, config, table)
        units.append(EmittedUnit(output_name(src.path, config.target_name), text, prov, macro_text,
                                 config.target_name))
    storage_text = storage_definitions(config, generated.aliases)
    storage = EmittedUnit(STORAGE_FILE, storage_text, [None] * len(storage_text.splitlines()),
                          storage_text, config.target_name)
    return TranspileResult(units, storage, model, generated, config)


def write_units(result: TranspileResult, out_dir: Union[str, Path]) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for unit in result.all_units:
        path = out_dir / unit.path
        path.write_text(unit.text, encoding="utf-8")
        written.append(path)
    return written
