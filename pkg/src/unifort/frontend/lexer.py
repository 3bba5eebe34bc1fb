"""Tokenizer for single logical lines of the Fortran subset."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..diagnostics import Origin, TranspileError

DOTTED = {
    ".and.": ".and.", ".or.": ".or.", ".not.": ".not.", ".eqv.": ".eqv.", ".neqv.": ".neqv.",
    ".eq.": "==", ".ne.": "/=", ".lt.": "<", ".le.": "<=", ".gt.": ">", ".ge.": ">=",
}

_SPEC = [
    ("ws", r"[ \t]+"),
    ("num", r"(?:\d+(?:\.(?![A-Za-z]+\.)\d*)?|\.\d+)(?:[dDeE][+-]?\d+)?(?:_\w+)?"),
    ("logical", r"\.(?:true|false)\.(?:_\w+)?"),
    ("dot", r"\.[A-Za-z]+\."),
    ("name", r"[A-Za-z_]\w*"),
    ("str", r"'(?:[^']|'')*'|\"(?:[^\"]|\"\")*\""),
    ("op", r"<<<|>>>|\*\*|//|==|/=|<=|>=|=>|::|[-+*/()<>=,:%@{}&]"),
]
_RE = re.compile("|".join(f"(?P<{k}>{p})" for k, p in _SPEC), re.IGNORECASE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, str, logical, name, op, eof
    value: str  # normalised: lower case names, canonical operators
    text: str  # original spelling
    pos: int


def tokenize(text: str, origin: Origin | None = None) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _RE.match(text, pos)
        if m is None:
            if text[pos] == "!":
                break
            raise TranspileError.single("syntax", f"unexpected character {text[pos]!r} in {text.strip()!r}", origin)
        kind = m.lastgroup
        raw = m.group(0)
        if kind == "ws":
            pos = m.end()
            continue
        if kind == "dot":
            low = raw.lower()
            if low not in DOTTED:
                raise TranspileError.single("syntax", f"unknown operator {raw}", origin)
            tokens.append(Token("op", DOTTED[low], raw, pos))
        elif kind == "logical":
            tokens.append(Token("logical", raw.lower().split("_")[0], raw, pos))
        elif kind == "str":
            q = raw[0]
            tokens.append(Token("str", raw[1:-1].replace(q + q, q), raw, pos))
        elif kind in ("name", "num"):
            tokens.append(Token(kind, raw.lower(), raw, pos))
        else:
            tokens.append(Token("op", raw, raw, pos))
        pos = m.end()
    tokens.append(Token("eof", "", "", len(text)))
    return tokens
