"""Small expression helpers: affine simplification and builders."""

from __future__ import annotations

from typing import Optional

from ..frontend.ast import Apply, BinOp, Macro, Name, Num, Slice, UnOp


def num(v: int) -> Num:
    return Num(str(v))


def affine(e) -> Optional[dict]:
    """Return ``{name: coeff, '': const}`` for integer-affine expressions, else None."""
    if isinstance(e, Num):
        return {"": e.value} if e.is_integer else None
    if isinstance(e, Name):
        return {e.name: 1, "": 0}
    if isinstance(e, UnOp) and e.op in "+-":
        a = affine(e.operand)
        if a is None:
            return None
        return a if e.op == "+" else {k: -v for k, v in a.items()}
    if isinstance(e, BinOp) and e.op in ("+", "-"):
        a, b = affine(e.left), affine(e.right)
        if a is None or b is None:
            return None
        out = dict(a)
        sign = 1 if e.op == "+" else -1
        for k, v in b.items():
            out[k] = out.get(k, 0) + sign * v
        return out
    if isinstance(e, BinOp) and e.op == "*":
        a, b = affine(e.left), affine(e.right)
        if a is None or b is None:
            return None
        if set(a) == {""}:
            a, b = b, a
        if set(b) != {""}:
            return None
        return {k: v * b[""] for k, v in a.items()}
    return None


def from_affine(terms: dict):
    expr = None
    for name, coeff in terms.items():
        if name == "" or coeff == 0:
            continue
        term = Name(name) if abs(coeff) == 1 else BinOp("*", num(abs(coeff)), Name(name))
        if expr is None:
            expr = term if coeff > 0 else UnOp("-", term)
        else:
            expr = BinOp("+" if coeff > 0 else "-", expr, term)
    const = terms.get("", 0)
    if expr is None:
        return num(const) if const >= 0 else UnOp("-", num(-const))
    if const > 0:
        return BinOp("+", expr, num(const))
    if const < 0:
        return BinOp("-", expr, num(-const))
    return expr


def simplify(e):
    a = affine(e)
    return e if a is None else from_affine(a)


def extent(lower, upper):
    """Number of points in ``lower:upper``."""
    return simplify(BinOp("+", BinOp("-", upper, lower), num(1)))


def offset(e, delta: int):
    return simplify(BinOp("+", e, num(delta)))


def substitute(e, mapping: dict):
    """Replace Names by expressions throughout ``e``."""
    if isinstance(e, Name):
        return mapping.get(e.name, e)
    if isinstance(e, Apply):
        return Apply(e.name, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Macro):
        return Macro(e.name, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Slice):
        return Slice(substitute(e.lower, mapping) if e.lower is not None else None,
                     substitute(e.upper, mapping) if e.upper is not None else None)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, UnOp):
        return UnOp(e.op, substitute(e.operand, mapping))
    return e


def conjunction(parts):
    expr = None
    for p in parts:
        expr = p if expr is None else BinOp(".and.", expr, p)
    return expr


def disjunction(parts):
    expr = None
    for p in parts:
        expr = p if expr is None else BinOp(".or.", expr, p)
    return expr
