"""Subset parser: logical lines -> modules, routines, specifications, statements."""

from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence, Union

from ..diagnostics import Diagnostic, TranspileError
from ..source import LogicalLine, split_comment
from .ast import (
    Apply,
    Assign,
    Call,
    Component,
    Cycle,
    Dim,
    Do,
    DomainDependantSpec,
    DoWhile,
    EndDirective,
    Exit,
    If,
    IOStmt,
    Logical,
    Macro,
    ModuleDecl,
    Name,
    Num,
    ParallelRegion,
    ParallelRegionSpec,
    PointerAssign,
    Print,
    Program,
    Return,
    RoutineDecl,
    SchemeSpec,
    Slice,
    SymbolSpec,
    UseStmt,
)
from .directives import is_directive, parse_directive
from .expr import TokenStream

TYPE_KEYWORDS = ("real", "integer", "logical", "character", "double", "complex", "type")
IO_KEYWORDS = ("write", "read", "open", "close", "inquire", "flush", "rewind", "backspace")
UNSUPPORTED = {
    "allocate": "allocate statements",
    "deallocate": "deallocate statements",
    "nullify": "nullify statements",
    "goto": "goto statements",
    "go": "goto statements",
    "select": "select case constructs",
    "where": "where constructs",
    "forall": "forall constructs",
    "interface": "interface blocks",
    "function": "function subprograms",
    "program": "main programs",
    "stop": "stop statements",
    "entry": "entry statements",
    "block": "block constructs",
    "associate": "associate constructs",
    "common": "common blocks",
    "equivalence": "equivalence statements",
}
SIMPLE_ATTRIBUTES = ("pointer", "parameter", "save", "device", "value", "allocatable", "target",
                     "optional", "managed", "constant", "pinned", "public", "private", "contiguous")


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, lines: Sequence[LogicalLine], macro_names: frozenset):
        self.lines = []
        for line in lines:
            code, _ = split_comment(line.text)
            if not code.strip():
                continue
            self.lines.append(LogicalLine(code.rstrip(), line.origin))
        self.pos = 0
        self.macro_names = macro_names
        self.diags: list[Diagnostic] = []
        self.scheme: Optional[SchemeSpec] = None

    # -- helpers -----------------------------------------------------------

    def peek(self) -> Optional[LogicalLine]:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def take(self) -> LogicalLine:
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def stream(self, line: LogicalLine, text: Optional[str] = None) -> TokenStream:
        return TokenStream.from_text(line.text if text is None else text, line.first, self.macro_names)

    def error(self, rule: str, message: str, line: LogicalLine):
        self.diags.append(Diagnostic(rule, message, line.first))

    @staticmethod
    def words(line: LogicalLine) -> list[str]:
        return re.findall(r"[a-z_]\w*", line.text.lower())

    def end_kind(self, line: LogicalLine) -> Optional[str]:
        """Return the construct closed by an ``end`` line, '' for a bare end, None otherwise."""
        text = line.text.strip().lower()
        m = re.match(r"^end\s*(do|if|subroutine|module|function|program|type|interface|select|where)?\b(\s+\w+)?\s*$", text)
        if not m:
            return None
        return m.group(1) or ""

    # -- program units ----------------------------------------------------

    def program(self) -> Program:
        prog = Program()
        while self.peek() is not None:
            line = self.peek()
            words = self.words(line)
            try:
                if is_directive(line.text):
                    self._scheme_directive(line)
                    continue
                if words[:1] == ["module"] and words[1:2] != ["procedure"]:
                    prog.modules.append(self.module())
                elif self._is_routine_header(line):
                    prog.routines.append(self.routine(None))
                else:
                    self._unsupported_or_stray(line)
                    self.take()
            except _Abort:
                break
        return prog

    def _scheme_directive(self, line: LogicalLine):
        self.take()
        directive = parse_directive(line)
        if isinstance(directive, SchemeSpec):
            if self.scheme is not None:
                self.error("directive-nesting", "@scheme blocks cannot be nested", line)
            self.scheme = directive
        elif isinstance(directive, EndDirective) and directive.kind == "scheme":
            if self.scheme is None:
                self.error("directive-nesting", "@end scheme without @scheme", line)
            self.scheme = None
        else:
            self.error("directive-position", "directive is not allowed outside a routine", line)

    def _unsupported_or_stray(self, line: LogicalLine):
        words = self.words(line)
        first = words[0] if words else ""
        if first == "type" and not line.text.lstrip().lower().startswith("type("):
            if not re.match(r"^\s*type\s*\(", line.text, re.I):
                self.error("unsupported-construct", "derived type definitions are not supported", line)
                self._skip_until(lambda l: self.end_kind(l) == "type")
                return
        if first in UNSUPPORTED:
            self.error("unsupported-construct", f"{UNSUPPORTED[first]} are not supported", line)
            if first in ("interface", "function", "program"):
                self._skip_until(lambda l: self.end_kind(l) == first)
            return
        self.error("syntax", f"statement {line.text.strip()!r} is not allowed here", line)

    def _skip_until(self, predicate):
        while self.peek() is not None:
            line = self.take()
            if predicate(line):
                return

    def _is_routine_header(self, line: LogicalLine) -> bool:
        return re.match(r"^\s*(attributes\s*\(\s*\w+\s*\)\s*)?(recursive\s+|pure\s+|elemental\s+)*subroutine\b",
                        line.text, re.I) is not None

    def module(self) -> ModuleDecl:
        header = self.take()
        words = self.words(header)
        if len(words) < 2:
            self.error("syntax", "module statement needs a name", header)
        mod = ModuleDecl(name=words[1] if len(words) > 1 else "?", path=header.first[0], origin=header.first)
        in_contains = False
        while True:
            line = self.peek()
            if line is None:
                self.error("syntax", f"module {mod.name} is not closed", header)
                raise _Abort()
            words = self.words(line)
            end = self.end_kind(line)
            if end in ("module", ""):
                self.take()
                break
            if is_directive(line.text):
                directive = parse_directive(line)
                if isinstance(directive, (SchemeSpec, EndDirective)) and getattr(directive, "kind", "scheme") == "scheme":
                    self._scheme_directive(line)
                elif isinstance(directive, DomainDependantSpec) and not in_contains:
                    self.take()
                    mod.domain_blocks.append(self._domain_block(directive, line))
                else:
                    self.take()
                    self.error("directive-position", "directive is not allowed at module level", line)
                continue
            if words[:1] == ["contains"]:
                self.take()
                in_contains = True
                continue
            if self._is_routine_header(line):
                in_contains = True
                mod.routines.append(self.routine(mod.name))
                continue
            if in_contains:
                self._unsupported_or_stray(line)
                self.take()
                continue
            self.take()
            try:
                self._spec_statement(line, mod.specs, mod.uses, mod)
            except TranspileError as exc:
                self.diags.extend(exc.diagnostics)
        return mod

    def routine(self, module: Optional[str]) -> RoutineDecl:
        header = self.take()
        m = re.match(r"^\s*(?:attributes\s*\(\s*(\w+)\s*\)\s*)?((?:recursive\s+|pure\s+|elemental\s+)*)subroutine\s+(\w+)\s*(\((.*)\))?\s*$",
                     header.text, re.I | re.S)
        if not m:
            self.error("syntax", f"cannot parse subroutine header {header.text.strip()!r}", header)
            raise _Abort()
        params = tuple(p.strip().lower() for p in (m.group(5) or "").split(",") if p.strip())
        routine = RoutineDecl(
            name=m.group(3).lower(), params=params, module=module,
            prefix=m.group(1).lower() if m.group(1) else None,
            scheme=self.scheme.name if self.scheme else None,
            origin=header.first,
        )
        # specification part
        while True:
            line = self.peek()
            if line is None:
                self.error("syntax", f"subroutine {routine.name} is not closed", header)
                raise _Abort()
            if is_directive(line.text):
                directive = parse_directive(line)
                if isinstance(directive, DomainDependantSpec):
                    self.take()
                    routine.domain_blocks.append(self._domain_block(directive, line))
                    continue
                break
            if not self._is_spec_statement(line):
                break
            self.take()
            try:
                self._spec_statement(line, routine.specs, routine.uses, routine)
            except TranspileError as exc:
                self.diags.extend(exc.diagnostics)
        routine.body, term = self.block({"subroutine", ""}, routine, region=None)
        return routine

    # -- specification part -----------------------------------------------

    def _is_spec_statement(self, line: LogicalLine) -> bool:
        text = line.text.strip().lower()
        first = self.words(line)[:1]
        if not first:
            return False
        w = first[0]
        if w in ("use", "implicit", "data", "save", "parameter", "external", "intrinsic",
                 "dimension", "public", "private", "contains"):
            return not re.match(r"^\w+\s*(\(.*\))?\s*=[^=>]", text) or w in ("parameter",)
        if w in TYPE_KEYWORDS:
            if w == "type" and not re.match(r"^type\s*\(", text):
                return True  # derived type definition; rejected later
            return not re.match(r"^\w+\s*(\([^)]*\))?\s*=[^=>]", text)
        return False

    def _spec_statement(self, line: LogicalLine, specs: list, uses: list, owner):
        text = line.text.strip()
        low = text.lower()
        words = self.words(line)
        w = words[0]
        if w == "use":
            ts = self.stream(line)
            ts.next()
            mod = ts.expect_name()
            only = None
            if ts.accept(","):
                if ts.expect_name() != "only":
                    ts.error("only 'only:' lists are supported on use statements")
                ts.expect(":")
                names = []
                while not ts.at_end():
                    names.append(ts.expect_name())
                    if not ts.accept(","):
                        break
                ts.expect_end()
                only = tuple(names)
            else:
                ts.expect_end()
            uses.append(UseStmt(mod, only, line.first))
        elif w == "implicit":
            if low.split() != ["implicit", "none"]:
                self.error("unsupported-construct", "only 'implicit none' is supported", line)
            owner.implicit_none = True
        elif w == "contains":
            self.error("unsupported-construct", "internal procedures are not supported", line)
        elif w in ("public", "private", "external", "intrinsic"):
            return
        elif w == "save":
            rest = re.sub(r"^save\s*(::)?", "", low).strip()
            targets = [n.strip() for n in rest.split(",") if n.strip()]
            for s in specs:
                if not targets or s.name in targets:
                    s.attributes = s.attributes | {"save"}
        elif w == "data":
            self._data_statement(line, specs)
        elif w == "parameter":
            ts = self.stream(line)
            ts.next()
            ts.expect("(")
            while True:
                name = ts.expect_name()
                ts.expect("=")
                value = ts.expr()
                spec = _find(specs, name)
                if spec is None:
                    self.error("undeclared-symbol", f"parameter {name} has no type declaration", line)
                else:
                    spec.is_parameter = True
                    spec.value = value
                if not ts.accept(","):
                    break
            ts.expect(")")
            ts.expect_end()
        elif w == "dimension":
            self.error("unsupported-construct", "dimension statements are not supported; use the attribute", line)
        elif w == "type" and not re.match(r"^type\s*\(", low):
            self.error("unsupported-construct", "derived type definitions are not supported", line)
            self._skip_until(lambda l: self.end_kind(l) == "type")
        else:
            specs.extend(self._declaration(line))

    def _data_statement(self, line: LogicalLine, specs: list):
        m = re.match(r"^\s*data\s+(.*?)\s*/(.*)/\s*$", line.text, re.I)
        if not m:
            self.error("syntax", "cannot parse data statement", line)
            return
        names = [n.strip().lower() for n in m.group(1).split(",") if n.strip()]
        for name in names:
            spec = _find(specs, name)
            if spec is None:
                self.error("undeclared-symbol", f"data statement names undeclared symbol {name}", line)
                continue
            spec.attributes = spec.attributes | {"data"}

    def _type_spec(self, ts: TokenStream) -> str:
        tok = ts.next()
        kind = tok.value
        if kind == "double":
            if ts.expect_name() != "precision":
                ts.error("expected 'double precision'")
            return "real8"
        if kind == "type":
            ts.expect("(")
            name = ts.expect_name()
            ts.expect(")")
            return name
        if kind == "character":
            if ts.at("("):
                depth = 0
                while True:
                    t = ts.next()
                    if t.value == "(":
                        depth += 1
                    elif t.value == ")":
                        depth -= 1
                        if depth == 0:
                            break
                    elif t.kind == "eof":
                        ts.error("unterminated character length")
            elif ts.accept("*"):
                ts.next()
            return "character"
        size = None
        if ts.accept("("):
            if ts.peek().kind == "name" and ts.peek().value == "kind":
                ts.next()
                ts.expect("=")
            size = ts.next().value
            ts.expect(")")
        elif ts.accept("*"):
            size = ts.next().value
        if kind == "real":
            return "real8" if size == "8" else "real4"
        if kind == "integer":
            return "integer8" if size == "8" else "integer4"
        if kind == "logical":
            return "logical"
        ts.error(f"unsupported type {kind}")

    def _dims(self, args: tuple, ts: TokenStream) -> tuple[tuple, Optional[str]]:
        macro = None
        if len(args) == 1 and isinstance(args[0], Macro):
            macro = args[0].name
            args = args[0].args
        dims = []
        for a in args:
            if isinstance(a, Slice):
                if a.lower is None and a.upper is None:
                    dims.append(Dim(None, None))
                elif a.upper is None:
                    ts.error("assumed-shape bounds with only a lower bound are not supported")
                else:
                    dims.append(Dim(a.lower if a.lower is not None else Num("1"), a.upper))
            else:
                dims.append(Dim(Num("1"), a))
        return tuple(dims), macro

    def _declaration(self, line: LogicalLine) -> list[SymbolSpec]:
        ts = self.stream(line)
        base = self._type_spec(ts)
        intent = "none"
        flags = set()
        dims: tuple = ()
        dom_macro = None
        while ts.accept(","):
            attr = ts.expect_name()
            if attr == "intent":
                ts.expect("(")
                parts = [ts.expect_name()]
                if not ts.at(")"):
                    parts.append(ts.expect_name())
                ts.expect(")")
                intent = "".join(parts)
                if intent not in ("in", "out", "inout"):
                    ts.error(f"unknown intent {intent!r}")
            elif attr == "dimension":
                dims, dom_macro = self._dims(ts.arg_list(), ts)
            elif attr in SIMPLE_ATTRIBUTES:
                flags.add(attr)
            else:
                ts.error(f"unsupported attribute {attr!r}")
        ts.accept("::")
        out = []
        while True:
            name = ts.expect_name()
            edims, emacro = dims, dom_macro
            if ts.at("("):
                edims, emacro = self._dims(ts.arg_list(), ts)
            value = None
            if ts.accept("=") or ts.accept("=>"):
                value = ts.expr()
            spec = SymbolSpec(
                name=name, base_type=base, dimensions=edims, intent=intent,
                is_pointer="pointer" in flags, is_parameter="parameter" in flags, value=value,
                attributes=frozenset(flags - {"pointer", "parameter", "public", "private"}),
                dom_macro=emacro, origin=line.first,
            )
            out.append(spec)
            if not ts.accept(","):
                break
        ts.expect_end()
        return out

    def _domain_block(self, spec: DomainDependantSpec, header: LogicalLine) -> DomainDependantSpec:
        names = []
        while True:
            line = self.peek()
            if line is None:
                self.error("directive-nesting", "@domainDependant block is not closed", header)
                raise _Abort()
            if is_directive(line.text):
                self.take()
                end = parse_directive(line)
                if isinstance(end, EndDirective) and end.kind == "domainDependant":
                    break
                self.error("directive-nesting", "@domainDependant block is not closed", header)
                break
            self.take()
            for n in line.text.split(","):
                n = n.strip().lower()
                if not n:
                    continue
                if not re.fullmatch(r"[a-z_]\w*", n):
                    self.error("directive-syntax", f"invalid symbol name {n!r} in @domainDependant", line)
                    continue
                names.append(n)
        if not names:
            self.error("directive-syntax", "@domainDependant block lists no symbols", header)
        spec.symbols = tuple(names)
        return spec

    # -- executable part --------------------------------------------------

    def block(self, stops: set, routine: RoutineDecl, region: Optional[ParallelRegionSpec]):
        """Parse statements until a line closing one of ``stops``; return (body, closing kind)."""
        body = []
        while True:
            line = self.peek()
            if line is None:
                raise _Abort()
            text = line.text.strip()
            low = text.lower()
            if is_directive(text):
                self.take()
                try:
                    directive = parse_directive(line)
                except TranspileError as exc:
                    self.diags.extend(exc.diagnostics)
                    continue
                if isinstance(directive, EndDirective):
                    if directive.kind in stops:
                        return body, directive.kind
                    self.error("directive-nesting", f"unexpected @end {directive.kind}", line)
                    continue
                if isinstance(directive, ParallelRegionSpec):
                    if region is not None:
                        self.error("nested-parallel-region",
                                   "parallel regions cannot be nested inside each other", line)
                    inner, _ = self.block({"parallelRegion"}, routine, directive)
                    body.append(ParallelRegion(directive, inner, line.first))
                    continue
                if isinstance(directive, DomainDependantSpec):
                    self.error("directive-position",
                               "@domainDependant must appear between the specification and the executable part", line)
                    self._domain_block(directive, line)
                    continue
                self.error("directive-position", "@scheme must enclose whole routines", line)
                continue
            end = self.end_kind(line)
            if end is not None:
                if end in stops:
                    self.take()
                    return body, end
                self.error("syntax", f"unexpected {text!r}", line)
                self.take()
                if end in ("subroutine", "module", ""):
                    raise _Abort()
                continue
            if re.match(r"^(else\b|elseif\b)", low):
                if "else" in stops:
                    return body, "else"
                self.error("syntax", "else without if", line)
                self.take()
                continue
            self.take()
            try:
                stmt = self.statement(line, routine, region)
            except TranspileError as exc:
                self.diags.extend(exc.diagnostics)
                continue
            if stmt is not None:
                body.append(stmt)

    def statement(self, line: LogicalLine, routine: RoutineDecl, region, text: Optional[str] = None):
        text = (line.text if text is None else text).strip()
        low = text.lower()
        words = re.findall(r"[a-z_]\w*", low)
        first = words[0] if words else ""
        origin = line.first

        if self._is_spec_statement(LogicalLine(text, line.origin)) and first in TYPE_KEYWORDS + ("use", "implicit", "data", "save"):
            raise TranspileError.single("syntax", "specification statement after executable statements", origin)
        if first == "do" and not re.match(r"^do\s*=", low):
            return self._do(line, text, routine, region)
        if first == "if" and re.match(r"^if\s*\(", low):
            return self._if(line, text, routine, region)
        ts = self.stream(line, text)
        if first == "call" and ts.peek(1).kind == "name":
            ts.next()
            name = ts.expect_name()
            launch = None
            if ts.accept("<<<"):
                grid = ts.expr()
                ts.expect(",")
                block = ts.expr()
                ts.expect(">>>")
                launch = (grid, block)
            args = ts.arg_list() if ts.at("(") else ()
            ts.expect_end()
            return Call(name, args, launch, origin)
        if low in ("return", "exit", "cycle", "continue"):
            return {"return": Return, "exit": Exit, "cycle": Cycle}.get(low, lambda o: None)(origin)
        if first == "print" and not re.match(r"^print\s*(\(.*\))?\s*=", low):
            ts.next()
            if ts.accept("*"):
                fmt = None
            else:
                fmt = ts.expr()
            items = []
            while ts.accept(","):
                items.append(ts.expr())
            ts.expect_end()
            return Print(fmt, tuple(items), origin)
        if first in IO_KEYWORDS and re.match(rf"^{first}\s*\(", low) and not _looks_like_assignment(ts):
            return IOStmt(first, text, origin)
        if first in UNSUPPORTED and not _looks_like_assignment(ts):
            raise TranspileError.single("unsupported-construct", f"{UNSUPPORTED[first]} are not supported", origin)
        # assignment
        target = ts.expr(6)
        if not isinstance(target, (Name, Apply, Component)):
            ts.error(f"cannot parse statement {text!r}")
        if ts.accept("=>"):
            value = ts.expr()
            ts.expect_end()
            return PointerAssign(target, value, origin)
        ts.expect("=")
        value = ts.expr()
        ts.expect_end()
        return Assign(target, value, origin)

    def _do(self, line, text, routine, region):
        ts = self.stream(line, text)
        ts.next()
        origin = line.first
        if ts.at_end():
            body, _ = self.block({"do"}, routine, region)
            return DoWhile(Logical(True), body, origin)
        if ts.peek().value == "while" and ts.peek(1).value == "(":
            ts.next()
            ts.expect("(")
            cond = ts.expr()
            ts.expect(")")
            ts.expect_end()
            body, _ = self.block({"do"}, routine, region)
            return DoWhile(cond, body, origin)
        if ts.peek().kind == "num":
            ts.error("labelled do loops are not supported")
        var = ts.expect_name()
        ts.expect("=")
        start = ts.expr()
        ts.expect(",")
        end = ts.expr()
        step = ts.expr() if ts.accept(",") else None
        ts.expect_end()
        body, _ = self.block({"do"}, routine, region)
        return Do(var, start, end, step, body, origin)

    def _if(self, line, text, routine, region):
        ts = self.stream(line, text)
        ts.next()
        ts.expect("(")
        cond = ts.expr()
        ts.expect(")")
        origin = line.first
        if ts.peek().value == "then" and ts.peek(1).kind == "eof":
            branches = []
            else_body = None
            body, closer = self.block({"if", "else"}, routine, region)
            branches.append((cond, body))
            while closer == "else":
                else_line = self.take()
                low = else_line.text.strip().lower()
                m = re.match(r"^else\s*if\s*\(", low)
                if m:
                    ets = self.stream(else_line)
                    ets.next()
                    if ets.peek().value == "if":
                        ets.next()
                    ets.expect("(")
                    econd = ets.expr()
                    ets.expect(")")
                    if ets.expect_name() != "then":
                        ets.error("expected 'then'")
                    ets.expect_end()
                    body, closer = self.block({"if", "else"}, routine, region)
                    branches.append((econd, body))
                elif low == "else":
                    else_body, closer = self.block({"if"}, routine, region)
                else:
                    self.error("syntax", f"cannot parse {else_line.text.strip()!r}", else_line)
                    body, closer = self.block({"if", "else"}, routine, region)
            return If(branches, else_body, origin)
        rest = text[ts.peek().pos:]
        if not rest.strip():
            ts.error("if statement without a body")
        inner = self.statement(line, routine, region, rest)
        if isinstance(inner, (Do, DoWhile, If)):
            ts.error("a one-line if must contain a simple statement")
        return If([(cond, [inner] if inner is not None else [])], None, origin)


def _looks_like_assignment(ts: TokenStream) -> bool:
    depth = 0
    for tok in ts.tokens[ts.i:]:
        if tok.value == "(":
            depth += 1
        elif tok.value == ")":
            depth -= 1
        elif tok.value in ("=", "=>") and depth == 0 and tok.kind == "op":
            return True
    return False


def _find(specs, name) -> Optional[SymbolSpec]:
    for s in specs:
        if s.name == name:
            return s
    return None


def parse_program(sources: Union[Sequence[LogicalLine], Iterable[Sequence[LogicalLine]]],
                  macro_names: Iterable[str] = ()) -> Program:
    """Parse one or several merged line streams into a single program."""
    sources = list(sources)
    if sources and isinstance(sources[0], LogicalLine):
        streams = [sources]
    else:
        streams = sources
    program = Program()
    diags: list[Diagnostic] = []
    for lines in streams:
        parser = _Parser(lines, frozenset(macro_names))
        try:
            part = parser.program()
        except TranspileError as exc:
            diags.extend(parser.diags)
            diags.extend(exc.diagnostics)
            continue
        diags.extend(parser.diags)
        if parser.scheme is not None:
            diags.append(Diagnostic("directive-nesting", "@scheme block is never closed", parser.scheme.origin))
        program.modules.extend(part.modules)
        program.routines.extend(part.routines)
    names = {}
    for r in program.all_routines():
        if r.name in names:
            diags.append(Diagnostic("duplicate-routine", f"routine {r.name} is defined twice", r.origin))
        names[r.name] = r
    if diags:
        raise TranspileError(diags)
    return program
