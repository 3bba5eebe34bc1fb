"""Parsing of ``@parallelRegion``, ``@domainDependant`` and ``@scheme`` lines."""

from __future__ import annotations

import re
from typing import Optional, Union

from ..diagnostics import Diagnostic, Origin, TranspileError
from ..source import LogicalLine
from .ast import (
    DOMAIN_FLAGS,
    Domain,
    DomainDependantSpec,
    EndDirective,
    Num,
    ParallelRegionSpec,
    RegionDomain,
    SchemeSpec,
)
from .expr import parse_expr

REGION_ATTRIBUTES = ("appliesTo", "domName", "domSize", "startAt", "endAt", "reduction", "template")
DOMAIN_ATTRIBUTES = ("domName", "domSize", "accPP", "domPP", "attribute")
REDUCTION_OPERATORS = ("+", "*", "max", "min")

_HEAD_RE = re.compile(r"^\s*@\s*(\w+)\s*(.*)$", re.DOTALL)
_END_RE = re.compile(r"^\s*@\s*end\s+(\w+)\s*$", re.IGNORECASE)

Directive = Union[ParallelRegionSpec, DomainDependantSpec, SchemeSpec, EndDirective]


def is_directive(text: str) -> bool:
    return text.lstrip().startswith("@")


def _split_top(text: str) -> list[str]:
    parts, depth, buf = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(buf).strip())
            buf = []
            continue
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        buf.append(ch)
    tail = "".join(buf).strip()
    if tail or parts:
        parts.append(tail)
    return parts


def _attributes(body: str, known: tuple, kind: str, origin: Origin) -> dict[str, list[str]]:
    lookup = {k.lower(): k for k in known}
    attrs: dict[str, list[str]] = {}
    diags = []
    for item in _split_top(body):
        if not item:
            continue
        m = re.match(r"^(\w+)\s*\((.*)\)$", item, re.DOTALL)
        if not m:
            diags.append(Diagnostic("directive-syntax", f"malformed attribute {item!r} in @{kind}", origin))
            continue
        key = lookup.get(m.group(1).lower())
        if key is None:
            diags.append(Diagnostic(
                "directive-attribute",
                f"unknown attribute {m.group(1)!r} for @{kind} (known: {', '.join(known)})", origin))
            continue
        if key in attrs:
            diags.append(Diagnostic("directive-attribute", f"attribute {key} given twice", origin))
            continue
        attrs[key] = [p for p in _split_top(m.group(2))]
    if diags:
        raise TranspileError(diags)
    return attrs


def parse_size(text: str, origin: Optional[Origin] = None):
    """``0:nx+1`` -> (0, nx+1); bare ``nx`` -> (1, nx)."""
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == ":" and depth == 0:
            return parse_expr(text[:i], origin), parse_expr(text[i + 1:], origin)
    return Num("1"), parse_expr(text, origin)


def _body(rest: str, kind: str, origin: Origin) -> str:
    rest = rest.strip()
    if not rest:
        return ""
    if not (rest.startswith("{") and rest.endswith("}")):
        raise TranspileError.single("directive-syntax", f"@{kind} attributes must be enclosed in braces", origin)
    return rest[1:-1]


def parse_directive(line: Union[LogicalLine, str], origin: Optional[Origin] = None) -> Directive:
    if isinstance(line, LogicalLine):
        text, origin = line.text, line.first
    else:
        text = line
    end = _END_RE.match(text)
    if end:
        kind = end.group(1).lower()
        names = {"parallelregion": "parallelRegion", "domaindependant": "domainDependant", "scheme": "scheme"}
        if kind not in names:
            raise TranspileError.single("directive-syntax", f"unknown directive @end {end.group(1)}", origin)
        return EndDirective(names[kind], origin)
    m = _HEAD_RE.match(text)
    if not m:
        raise TranspileError.single("directive-syntax", f"not a directive: {text.strip()!r}", origin)
    kind = m.group(1).lower()
    if kind == "parallelregion":
        return _parallel_region(_body(m.group(2), "parallelRegion", origin), origin)
    if kind == "domaindependant":
        return _domain_dependant(_body(m.group(2), "domainDependant", origin), origin)
    if kind == "scheme":
        name = _body(m.group(2), "scheme", origin).strip()
        if not re.fullmatch(r"[\w-]+", name):
            raise TranspileError.single("directive-syntax", "@scheme needs one implementation name", origin)
        return SchemeSpec(name.lower(), origin)
    raise TranspileError.single("directive-syntax", f"unknown directive @{m.group(1)}", origin)


def _parallel_region(body: str, origin: Origin) -> ParallelRegionSpec:
    attrs = _attributes(body, REGION_ATTRIBUTES, "parallelRegion", origin)
    diags = []
    for required in ("domName", "domSize"):
        if required not in attrs:
            diags.append(Diagnostic("directive-missing-attribute",
                                    f"@parallelRegion requires the {required} attribute", origin))
    if diags:
        raise TranspileError(diags)
    names = [n.strip().lower() for n in attrs["domName"]]
    sizes = attrs["domSize"]
    if not names or any(not n for n in names):
        raise TranspileError.single("directive-syntax", "domName needs at least one domain", origin)
    if len(names) != len(sizes):
        raise TranspileError.single("domain-count-mismatch",
                                    f"|domName| = {len(names)} but |domSize| = {len(sizes)}", origin)
    for key in ("startAt", "endAt"):
        if key in attrs and len(attrs[key]) != len(names):
            raise TranspileError.single("domain-count-mismatch",
                                        f"|{key}| = {len(attrs[key])} but |domName| = {len(names)}", origin)
    applies = set()
    for member in attrs.get("appliesTo", []):
        arch = member.strip().lower()
        if arch not in ("cpu", "gpu"):
            raise TranspileError.single("directive-attribute", f"unknown architecture {member!r} in appliesTo", origin)
        applies.add(arch)
    if not applies:
        applies = {"cpu", "gpu"}
    domains = []
    for idx, (name, size) in enumerate(zip(names, sizes)):
        lower, upper = parse_size(size, origin)
        start = parse_expr(attrs["startAt"][idx], origin) if "startAt" in attrs else Num("1")
        end = parse_expr(attrs["endAt"][idx], origin) if "endAt" in attrs else upper
        domains.append(RegionDomain(name, lower, upper, start, end))
    reductions = []
    for member in attrs.get("reduction", []):
        if ":" not in member:
            raise TranspileError.single("directive-syntax", f"reduction member {member!r} needs operator:symbol", origin)
        op, sym = (p.strip().lower() for p in member.split(":", 1))
        if op not in REDUCTION_OPERATORS:
            raise TranspileError.single("directive-attribute", f"unsupported reduction operator {op!r}", origin)
        reductions.append((op, sym))
    template = None
    if "template" in attrs:
        if len(attrs["template"]) != 1 or not attrs["template"][0]:
            raise TranspileError.single("directive-syntax", "template takes exactly one name", origin)
        template = attrs["template"][0]
    return ParallelRegionSpec(frozenset(applies), tuple(domains), tuple(reductions), template, origin)


def _domain_dependant(body: str, origin: Origin) -> DomainDependantSpec:
    attrs = _attributes(body, DOMAIN_ATTRIBUTES, "domainDependant", origin)
    names = [n.strip().lower() for n in attrs.get("domName", [])]
    sizes = attrs.get("domSize", [])
    if len(names) != len(sizes):
        raise TranspileError.single("domain-count-mismatch",
                                    f"|domName| = {len(names)} but |domSize| = {len(sizes)}", origin)
    domains = tuple(Domain(n, *parse_size(s, origin)) for n, s in zip(names, sizes))
    lookup = {f.lower(): f for f in DOMAIN_FLAGS}
    flags = set()
    for member in attrs.get("attribute", []):
        flag = lookup.get(member.strip().lower())
        if flag is None:
            raise TranspileError.single("directive-attribute", f"unknown domainDependant flag {member!r}", origin)
        flags.add(flag)
    if {"present", "transferHere"} <= flags:
        raise TranspileError.single("present-transferhere",
                                    "the present and transferHere flags may not be combined", origin)
    acc_pp = _single(attrs, "accPP", origin)
    dom_pp = _single(attrs, "domPP", origin)
    return DomainDependantSpec(domains, acc_pp, dom_pp, frozenset(flags), (), origin)


def _single(attrs, key, origin) -> Optional[str]:
    if key not in attrs:
        return None
    if len(attrs[key]) != 1 or not re.fullmatch(r"[A-Za-z_]\w*", attrs[key][0]):
        raise TranspileError.single("directive-syntax", f"{key} takes exactly one macro name", origin)
    return attrs[key][0]
