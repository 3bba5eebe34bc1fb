"""Runtime values for the interpreter: cells, arrays with bounds, dim3."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class InterpreterError(Exception):
    """Runtime failure (bounds, undefined read, unsupported construct)."""

    def __init__(self, message: str, origin=None):
        self.origin = origin
        where = f"{origin[0]}:{origin[1]}: " if origin else ""
        super().__init__(where + message)


class _Undefined:
    __slots__ = ()

    def __repr__(self):
        return "UNDEFINED"


UNDEF = _Undefined()


class Cell:
    """A mutable variable slot; sharing a cell gives by-reference passing."""

    __slots__ = ("value", "name")

    def __init__(self, value=UNDEF, name: str = ""):
        self.value = value
        self.name = name

    def __repr__(self):
        return f"Cell({self.name}={self.value!r})"


@dataclass
class Dim3:
    x: int = 1
    y: int = 1
    z: int = 1

    def copy(self) -> "Dim3":
        return Dim3(self.x, self.y, self.z)


DTYPES = {
    "real8": np.float64, "real4": np.float64, "integer4": np.int64, "integer8": np.int64,
    "logical": np.bool_,
}


class ArrayObject:
    """Fortran array: column-major numpy data plus per-dimension lower bounds."""

    __slots__ = ("data", "lower", "name")

    def __init__(self, data: np.ndarray, lower=None, name: str = ""):
        self.data = data
        self.lower = tuple(lower) if lower is not None else (1,) * data.ndim
        self.name = name

    @classmethod
    def allocate(cls, lower, upper, dtype=np.float64, fill=math.nan, name: str = "") -> "ArrayObject":
        shape = tuple(max(0, u - lo + 1) for lo, u in zip(lower, upper))
        if np.dtype(dtype).kind != "f" and isinstance(fill, float) and math.isnan(fill):
            fill = 0
        data = np.full(shape, fill, dtype=dtype, order="F")
        return cls(data, lower, name)

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def upper(self) -> tuple:
        return tuple(lo + n - 1 for lo, n in zip(self.lower, self.data.shape))

    def _offset(self, idx) -> tuple:
        if len(idx) != self.data.ndim:
            raise InterpreterError(f"{self.name or 'array'} has rank {self.data.ndim}, indexed with {len(idx)} subscripts")
        out = []
        for d, (i, lo, n) in enumerate(zip(idx, self.lower, self.data.shape)):
            off = int(i) - lo
            if off < 0 or off >= n:
                raise InterpreterError(
                    f"index {int(i)} out of bounds {lo}:{lo + n - 1} in dimension {d + 1} of {self.name or 'array'}")
            out.append(off)
        return tuple(out)

    def get(self, idx):
        return self.data[self._offset(idx)]

    def set(self, idx, value) -> None:
        self.data[self._offset(idx)] = value

    def section_index(self, subs) -> tuple:
        """numpy index for a mix of integer subscripts and (lo, hi, step) triplets."""
        if len(subs) != self.data.ndim:
            raise InterpreterError(f"{self.name or 'array'} has rank {self.data.ndim}, indexed with {len(subs)} subscripts")
        out = []
        for d, (s, lo, n) in enumerate(zip(subs, self.lower, self.data.shape)):
            if isinstance(s, tuple):
                a, b, step = s
                a = lo if a is None else int(a)
                b = lo + n - 1 if b is None else int(b)
                if a <= b and (a < lo or b > lo + n - 1):
                    raise InterpreterError(f"section {a}:{b} out of bounds {lo}:{lo + n - 1} of {self.name or 'array'}")
                out.append(slice(a - lo, b - lo + 1, step))
            else:
                off = int(s) - lo
                if off < 0 or off >= n:
                    raise InterpreterError(f"index {int(s)} out of bounds {lo}:{lo + n - 1} of {self.name or 'array'}")
                out.append(off)
        return tuple(out)

    def section(self, subs) -> "ArrayObject":
        view = self.data[self.section_index(subs)]
        return ArrayObject(view, None, self.name)

    def copy(self) -> "ArrayObject":
        return ArrayObject(np.array(self.data, order="F", copy=True), self.lower, self.name)

    def __repr__(self):
        return f"ArrayObject({self.name}, lower={self.lower}, shape={self.data.shape})"


def values_of(v):
    """numpy payload for arithmetic on arrays, plain value otherwise."""
    return v.data if isinstance(v, ArrayObject) else v


def wrap_result(v):
    if isinstance(v, np.ndarray) and v.ndim > 0:
        return ArrayObject(v)
    return v


def int_div(a, b):
    if isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer)):
        if b == 0:
            raise InterpreterError("integer division by zero")
        q = abs(int(a)) // abs(int(b))
        return q if (a >= 0) == (b >= 0) else -q
    return a / b


def fortran_modulo(a, p):
    if isinstance(a, (int, np.integer)) and isinstance(p, (int, np.integer)):
        return int(a) % int(p)
    return a - math.floor(a / p) * p


def fortran_mod(a, p):
    if isinstance(a, (int, np.integer)) and isinstance(p, (int, np.integer)):
        return int(a) - int_div(a, p) * int(p)
    return a - math.trunc(a / p) * p


def nint(a) -> int:
    return int(math.floor(a + 0.5)) if a >= 0 else -int(math.floor(-a + 0.5))


def to_kind(kind: Optional[str], value):
    """Convert an assigned scalar to the variable's type."""
    if value is UNDEF or kind is None:
        return value
    if kind in ("integer4", "integer8"):
        if isinstance(value, (bool, np.bool_)):
            raise InterpreterError("cannot assign a logical to an integer")
        return int(value) if isinstance(value, (int, np.integer)) else math.trunc(value)
    if kind in ("real8", "real4"):
        return float(value)
    if kind == "logical":
        return bool(value)
    return value
