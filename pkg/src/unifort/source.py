"""Text-level phases: macro preprocessing, continuation merging, line splitting.

These run before parsing (preprocess, merge) and after code generation
(split, final preprocess). Everything here works on plain strings and keeps
track of which physical line each piece of text came from.
"""

from __future__ import annotations

import copy
import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .diagnostics import Diagnostic, Origin, TranspileError

DEFAULT_MAX_LINE_LENGTH = 132


class SourceKind(enum.Enum):
    PLAIN_FORTRAN = "f90"
    FORTRAN_WITH_MACROS = "F90"
    HYBRID = "h90"
    HYBRID_WITH_MACROS = "H90"

    @classmethod
    def from_path(cls, path: str | Path) -> "SourceKind":
        suffix = Path(path).suffix.lstrip(".")
        for kind in cls:
            if kind.value == suffix:
                return kind
        raise ValueError(f"unrecognised source extension {suffix!r} for {path}")

    @property
    def has_macros(self) -> bool:
        return self in (SourceKind.FORTRAN_WITH_MACROS, SourceKind.HYBRID_WITH_MACROS)

    @property
    def is_hybrid(self) -> bool:
        return self in (SourceKind.HYBRID, SourceKind.HYBRID_WITH_MACROS)


@dataclass
class RawSource:
    path: str
    lines: list[str]
    kind: SourceKind = SourceKind.HYBRID
    # physical line number (1-based) in ``path`` for every entry of ``lines``
    origins: Optional[list[int]] = None

    def __post_init__(self):
        if self.origins is None:
            self.origins = list(range(1, len(self.lines) + 1))
        if len(self.origins) != len(self.lines):
            raise ValueError("origins must align with lines")

    @classmethod
    def from_text(cls, text: str, path: str = "<string>", kind: SourceKind | None = None) -> "RawSource":
        if kind is None:
            try:
                kind = SourceKind.from_path(path)
            except ValueError:
                kind = SourceKind.HYBRID
        return cls(path=path, lines=text.splitlines(), kind=kind)

    @classmethod
    def read(cls, path: str | Path) -> "RawSource":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path), SourceKind.from_path(path))

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")


@dataclass
class LogicalLine:
    text: str
    origin: list[Origin]

    def __post_init__(self):
        if not self.origin:
            raise ValueError("a logical line needs at least one physical origin")

    @property
    def first(self) -> Origin:
        return self.origin[0]


# ---------------------------------------------------------------------------
# string / comment scanning shared by all phases

def split_comment(line: str) -> tuple[str, str]:
    """Split a free-form line into (code, comment) at the first ``!`` outside quotes."""
    quote = None
    i = 0
    while i < len(line):
        ch = line[i]
        if quote:
            if ch == quote:
                if i + 1 < len(line) and line[i + 1] == quote:
                    i += 2
                    continue
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "!":
            return line[:i], line[i:]
        i += 1
    return line, ""


def _code_segments(code: str):
    """Yield (is_string, text) chunks of a code fragment."""
    out = []
    buf = []
    quote = None
    i = 0
    while i < len(code):
        ch = code[i]
        if quote:
            buf.append(ch)
            if ch == quote:
                if i + 1 < len(code) and code[i + 1] == quote:
                    buf.append(code[i + 1])
                    i += 2
                    continue
                out.append((True, "".join(buf)))
                buf = []
                quote = None
        elif ch in "'\"":
            if buf:
                out.append((False, "".join(buf)))
            buf = [ch]
            quote = ch
        else:
            buf.append(ch)
        i += 1
    if buf:
        out.append((quote is not None, "".join(buf)))
    return out


# ---------------------------------------------------------------------------
# macro preprocessing

@dataclass
class MacroTable:
    object_macros: dict[str, str] = field(default_factory=dict)
    function_macros: dict[str, tuple[tuple[str, ...], str]] = field(default_factory=dict)

    def define(self, name: str, value: str = "1") -> None:
        self.function_macros.pop(name, None)
        self.object_macros[name] = value

    def define_function(self, name: str, params: Iterable[str], body: str) -> None:
        self.object_macros.pop(name, None)
        self.function_macros[name] = (tuple(params), body)

    def undefine(self, name: str) -> None:
        self.object_macros.pop(name, None)
        self.function_macros.pop(name, None)

    def is_defined(self, name: str) -> bool:
        return name in self.object_macros or name in self.function_macros

    def __bool__(self) -> bool:
        return bool(self.object_macros or self.function_macros)

    def copy(self) -> "MacroTable":
        return copy.deepcopy(self)


_TOKEN_RE = re.compile(
    r"(?P<num>\d+(?:\.\d*)?(?:[dDeE][+-]?\d+)?(?:_\w+)?|\.\d+(?:[dDeE][+-]?\d+)?)"
    r"|(?P<dotop>\.[A-Za-z]+\.)"
    r"|(?P<ident>[A-Za-z_]\w*)"
)
_DIRECTIVE_RE = re.compile(r"^\s*#\s*(\w+)\s*(.*?)\s*$")
_DEFINE_RE = re.compile(r"^([A-Za-z_]\w*)(\(([^)]*)\))?\s*(.*)$")


class MacroError(Exception):
    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(message)


def _split_args(text: str) -> list[str]:
    args, depth, buf = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            args.append("".join(buf).strip())
            buf = []
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        buf.append(ch)
    args.append("".join(buf).strip())
    return args


def _find_close(text: str, start: int) -> int:
    """Index of the parenthesis closing the one at ``start`` (or -1)."""
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                return i
    return -1


def expand_macros(text: str, table: MacroTable, disabled: frozenset = frozenset()) -> str:
    """Expand object- and function-like macros in a code fragment (no strings)."""
    if not table:
        return text
    out = []
    pos = 0
    while True:
        m = _TOKEN_RE.search(text, pos)
        if m is None:
            out.append(text[pos:])
            break
        out.append(text[pos:m.start()])
        name = m.group("ident")
        if name is None or name in disabled or not table.is_defined(name):
            out.append(m.group(0))
            pos = m.end()
            continue
        if name in table.object_macros:
            body = table.object_macros[name]
            out.append(expand_macros(body, table, disabled | {name}))
            pos = m.end()
            continue
        params, body = table.function_macros[name]
        j = m.end()
        while j < len(text) and text[j] in " \t":
            j += 1
        if j >= len(text) or text[j] != "(":
            # a function-like macro name without arguments is left alone
            out.append(m.group(0))
            pos = m.end()
            continue
        close = _find_close(text, j)
        if close < 0:
            raise MacroError("macro-syntax", f"unterminated argument list for macro {name}")
        args = _split_args(text[j + 1:close])
        if len(params) == 0 and args == [""]:
            args = []
        if len(args) != len(params):
            raise MacroError(
                "macro-arity",
                f"macro {name} expects {len(params)} argument(s), got {len(args)}",
            )
        expanded_args = {p: expand_macros(a, table, disabled) for p, a in zip(params, args)}
        substituted = _substitute(body, expanded_args)
        out.append(expand_macros(substituted, table, disabled | {name}))
        pos = close + 1
    return "".join(out)


def _substitute(body: str, args: dict[str, str]) -> str:
    def repl(m):
        ident = m.group("ident")
        if ident is not None and ident in args:
            return args[ident]
        return m.group(0)

    return _TOKEN_RE.sub(repl, body)


def expand_line(line: str, table: MacroTable) -> str:
    """Expand macros in the code part of a line; strings and comments are opaque."""
    code, comment = split_comment(line)
    if not table or not code.strip():
        return line
    pieces = []
    for is_string, chunk in _code_segments(code):
        pieces.append(chunk if is_string else expand_macros(chunk, table))
    return "".join(pieces) + comment


class _CondExpr:
    """Recursive-descent evaluator for ``#if`` expressions (integers only)."""

    _TOK = re.compile(r"\s*(\d+|[A-Za-z_]\w*|&&|\|\||==|!=|<=|>=|[()!<>+\-*/%])")

    def __init__(self, text: str):
        self.toks = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = self._TOK.match(text, pos)
            if not m:
                raise MacroError("macro-syntax", f"cannot parse #if expression {text!r}")
            self.toks.append(m.group(1))
            pos = m.end()
            while pos < len(text) and text[pos].isspace():
                pos += 1
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise MacroError("macro-syntax", f"unexpected end of #if expression (wanted {expected})")
        self.i += 1
        return tok

    def evaluate(self) -> int:
        value = self.or_()
        if self.peek() is not None:
            raise MacroError("macro-syntax", f"trailing token {self.peek()!r} in #if expression")
        return value

    def or_(self):
        v = self.and_()
        while self.peek() == "||":
            self.take()
            rhs = self.and_()
            v = int(bool(v) or bool(rhs))
        return v

    def and_(self):
        v = self.cmp()
        while self.peek() == "&&":
            self.take()
            rhs = self.cmp()
            v = int(bool(v) and bool(rhs))
        return v

    def cmp(self):
        v = self.add()
        while self.peek() in ("==", "!=", "<", ">", "<=", ">="):
            op = self.take()
            rhs = self.add()
            v = int({"==": v == rhs, "!=": v != rhs, "<": v < rhs, ">": v > rhs,
                     "<=": v <= rhs, ">=": v >= rhs}[op])
        return v

    def add(self):
        v = self.mul()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.mul()
            v = v + rhs if op == "+" else v - rhs
        return v

    def mul(self):
        v = self.unary()
        while self.peek() in ("*", "/", "%"):
            op = self.take()
            rhs = self.unary()
            if op == "*":
                v = v * rhs
            elif rhs == 0:
                raise MacroError("macro-syntax", "division by zero in #if expression")
            else:
                v = int(v / rhs) if op == "/" else v - int(v / rhs) * rhs
        return v

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return int(not self.unary())
        if tok == "-":
            self.take()
            return -self.unary()
        if tok == "+":
            self.take()
            return self.unary()
        if tok == "(":
            self.take()
            v = self.or_()
            self.take(")")
            return v
        tok = self.take()
        if tok.isdigit():
            return int(tok)
        # identifiers left after macro expansion evaluate to 0
        return 0


_DEFINED_RE = re.compile(r"\bdefined\s*(?:\(\s*([A-Za-z_]\w*)\s*\)|([A-Za-z_]\w*))")


def evaluate_condition(expr: str, table: MacroTable) -> bool:
    expr = _DEFINED_RE.sub(lambda m: "1" if table.is_defined(m.group(1) or m.group(2)) else "0", expr)
    expr = expand_macros(expr, table)
    return bool(_CondExpr(expr).evaluate())


@dataclass
class _Cond:
    parent_active: bool
    taken: bool
    active: bool
    origin: Origin
    seen_else: bool = False


class Preprocessor:
    """Stateful macro processor; the table persists across ``process`` calls."""

    def __init__(self, table: Optional[MacroTable] = None):
        self.table = table.copy() if table is not None else MacroTable()

    def process(self, source: RawSource) -> RawSource:
        stack: list[_Cond] = []
        out_lines: list[str] = []
        out_origins: list[int] = []
        diags: list[Diagnostic] = []

        def active() -> bool:
            return not stack or stack[-1].active

        for line, lineno in zip(source.lines, source.origins):
            origin = (source.path, lineno)
            m = _DIRECTIVE_RE.match(line)
            if m:
                try:
                    self._directive(m.group(1), m.group(2), stack, origin, active())
                except MacroError as exc:
                    diags.append(Diagnostic(exc.rule, str(exc), origin))
                continue
            if not active():
                continue
            try:
                out_lines.append(expand_line(line, self.table))
            except MacroError as exc:
                diags.append(Diagnostic(exc.rule, str(exc), origin))
                out_lines.append(line)
            out_origins.append(lineno)
        for cond in stack:
            diags.append(Diagnostic("unbalanced-conditional", "conditional block is never closed with #endif", cond.origin))
        if diags:
            raise TranspileError(diags)
        return RawSource(source.path, out_lines, source.kind, out_origins)

    def _directive(self, name: str, rest: str, stack: list[_Cond], origin: Origin, is_active: bool) -> None:
        if name in ("if", "ifdef", "ifndef"):
            if not is_active:
                stack.append(_Cond(False, True, False, origin))
                return
            if name == "if":
                value = evaluate_condition(rest, self.table)
            else:
                ident = rest.split()[0] if rest.split() else ""
                if not ident:
                    raise MacroError("macro-syntax", f"#{name} needs a macro name")
                value = self.table.is_defined(ident)
                if name == "ifndef":
                    value = not value
            stack.append(_Cond(True, value, value, origin))
        elif name == "elif":
            if not stack or stack[-1].seen_else:
                raise MacroError("unbalanced-conditional", "#elif without matching #if")
            cond = stack[-1]
            if cond.parent_active and not cond.taken and evaluate_condition(rest, self.table):
                cond.taken = cond.active = True
            else:
                cond.active = False
        elif name == "else":
            if not stack or stack[-1].seen_else:
                raise MacroError("unbalanced-conditional", "#else without matching #if")
            cond = stack[-1]
            cond.seen_else = True
            cond.active = cond.parent_active and not cond.taken
            cond.taken = True
        elif name == "endif":
            if not stack:
                raise MacroError("unbalanced-conditional", "#endif without matching #if")
            stack.pop()
        elif not is_active:
            return
        elif name == "define":
            m = _DEFINE_RE.match(rest)
            if not m:
                raise MacroError("macro-syntax", f"malformed #define {rest!r}")
            if m.group(2) is not None:
                params = [p.strip() for p in m.group(3).split(",") if p.strip()]
                self.table.define_function(m.group(1), params, m.group(4))
            else:
                self.table.define(m.group(1), m.group(4))
        elif name == "undef":
            self.table.undefine(rest.strip())
        else:
            raise MacroError("unsupported-directive", f"preprocessor directive #{name} is not supported")


def preprocess(source: RawSource, table: Optional[MacroTable] = None) -> RawSource:
    """Consume conditional/define directives and expand macros in ``source``."""
    return Preprocessor(table).process(source)


# ---------------------------------------------------------------------------
# continuation merging

def merge_continuations(source: RawSource) -> list[LogicalLine]:
    """Join ``&``-continued physical lines into logical statements."""
    result: list[LogicalLine] = []
    pending: Optional[str] = None
    pending_origin: list[Origin] = []
    held_comments: list[LogicalLine] = []

    for line, lineno in zip(source.lines, source.origins):
        origin = (source.path, lineno)
        stripped = line.strip()
        if pending is None:
            if not stripped:
                continue
            if stripped.startswith("!") or stripped.startswith("#"):
                result.append(LogicalLine(line.rstrip(), [origin]))
                continue
            code, comment = split_comment(line)
            code = code.rstrip()
            if code.endswith("&"):
                pending = code[:-1]
                pending_origin = [origin]
            else:
                result.append(LogicalLine(line.rstrip(), [origin]))
            continue

        if not stripped or stripped.startswith("!"):
            if stripped:
                held_comments.append(LogicalLine(line.rstrip(), [origin]))
            continue
        code, comment = split_comment(line)
        body = code.strip()
        lead = body.startswith("&")
        if lead:
            body = code.lstrip()[1:]
        else:
            body = code
        continued = body.rstrip().endswith("&")
        if continued:
            body = body.rstrip()[:-1]
        if lead and pending and not pending[-1].isspace() and body and not body[0].isspace():
            pending = pending + body
        else:
            pending = pending.rstrip() + " " + body.lstrip()
        pending_origin.append(origin)
        if not continued:
            result.extend(held_comments)
            held_comments = []
            text = pending.rstrip()
            if comment:
                text = text + " " + comment
            result.append(LogicalLine(text, pending_origin))
            pending = None
            pending_origin = []

    if pending is not None:
        raise TranspileError.single(
            "dangling-continuation",
            "the last line ends with a continuation marker '&'",
            pending_origin[-1],
        )
    return result


# ---------------------------------------------------------------------------
# line splitting

def _split_points(code: str, protect_macros: bool) -> list[int]:
    """Whitespace positions at which a code line may be broken."""
    points = []
    quote = None
    depth = 0
    protected_depths: list[int] = []
    i = 0
    while i < len(code):
        ch = code[i]
        if quote:
            if ch == quote:
                if i + 1 < len(code) and code[i + 1] == quote:
                    i += 2
                    continue
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "(":
            depth += 1
            if protect_macros:
                m = re.search(r"([A-Za-z_]\w*)\s*$", code[:i])
                if m and m.group(1).isupper() and any(c.isalpha() for c in m.group(1)):
                    protected_depths.append(depth)
        elif ch == ")":
            if protected_depths and protected_depths[-1] == depth:
                protected_depths.pop()
            depth -= 1
        elif ch in " \t" and not protected_depths:
            points.append(i)
        i += 1
    return points


def split_line(line: str, max_length: int = DEFAULT_MAX_LINE_LENGTH, protect_macros: bool = True,
               origin: Optional[Origin] = None) -> list[str]:
    """Break one physical line into pieces no longer than ``max_length``."""
    if len(line) <= max_length:
        return [line]
    stripped = line.lstrip()
    indent = line[: len(line) - len(stripped)]
    if stripped.startswith("#"):
        raise TranspileError.single("token-too-long", "preprocessor line exceeds the maximum line length", origin)
    if stripped.startswith("!$"):
        sentinel = stripped[:5]
        return _split_with_prefix(line, indent, indent + sentinel + "& ", max_length, False, origin, sentinel)
    if stripped.startswith("!"):
        words = stripped[1:].split()
        pieces, current = [], indent + "!"
        for word in words:
            if len(current) + 1 + len(word) > max_length and current.strip() != "!":
                pieces.append(current)
                current = indent + "!"
            current += " " + word
        pieces.append(current)
        if any(len(p) > max_length for p in pieces):
            raise TranspileError.single("token-too-long", "comment word longer than the maximum line length", origin)
        return pieces
    code, comment = split_comment(line)
    head = []
    if comment and len(code.rstrip()) <= max_length:
        head = [indent + comment.strip()]
        line = code.rstrip()
        if len(line) <= max_length:
            return head + [line]
    elif comment:
        head = [indent + comment.strip()]
        line = code.rstrip()
    return head + _split_with_prefix(line, indent, indent + "& ", max_length, protect_macros, origin)


def _split_with_prefix(line: str, indent: str, prefix: str, max_length: int, protect_macros: bool,
                       origin: Optional[Origin], sentinel: str = "") -> list[str]:
    pieces = []
    current = line
    first_skip = len(indent) + len(sentinel)
    while len(current) > max_length:
        offset = first_skip if not pieces else len(prefix)
        points = [p for p in _split_points(current, protect_macros) if p > offset]
        best = None
        for p in points:
            if len(current[:p].rstrip()) + 2 <= max_length and current[:p].strip() not in ("", "&"):
                best = p
        if best is None:
            raise TranspileError.single(
                "token-too-long",
                f"cannot split line at whitespace to fit {max_length} characters",
                origin,
            )
        pieces.append(current[:best].rstrip() + " &")
        current = prefix + current[best:].lstrip()
    pieces.append(current)
    return pieces


def split_lines(text: str, max_length: int = DEFAULT_MAX_LINE_LENGTH, protect_macros: bool = True) -> str:
    """Split every over-long line of generated source at whitespace."""
    trailing = text.endswith("\n")
    out = []
    for line in text.splitlines():
        out.extend(split_line(line, max_length, protect_macros))
    return "\n".join(out) + ("\n" if trailing else "")


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())
