"""Closure-compiling interpreter for the supported Fortran subset.

Each statement and expression is compiled once into a Python closure over a
frame (a dict of Cells). Arrays keep Fortran bounds and column-major data;
scalars are passed by reference by sharing cells. CUDA kernel launches run
sequentially, block by block and thread by thread, when ``emulate_kernels``
is set.
"""

from __future__ import annotations

import math
import operator
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..frontend.ast import (
    Apply,
    Assign,
    BinOp,
    Call,
    Component,
    Cycle,
    Do,
    DoWhile,
    Exit,
    If,
    IOStmt,
    Logical,
    Macro,
    Name,
    Num,
    ParallelRegion,
    PointerAssign,
    Print,
    Program,
    Raw,
    Return,
    RoutineDecl,
    Slice,
    Str,
    SymbolSpec,
    UnOp,
    walk_stmts,
)
from .runtime import (
    DTYPES,
    UNDEF,
    ArrayObject,
    Cell,
    Dim3,
    InterpreterError,
    fortran_mod,
    fortran_modulo,
    int_div,
    nint,
    to_kind,
    values_of,
    wrap_result,
)

EXIT, CYCLE, RETURN = 1, 2, 3
CUDA_BUILTINS = ("blockidx", "threadidx", "blockdim", "griddim")
IGNORED_MODULES = frozenset({"cudafor", "openacc", "omp_lib"})
LAUNCH_ORDERS = ("forward", "reverse", "seed")


def literal(n: Num):
    body, _, kind = n.text.partition("_")
    if body.isdigit():
        return int(body)
    low = body.lower()
    if "d" in low:
        return float(low.replace("d", "e"))
    value = float(low)
    if kind in ("8", "dp"):
        return value
    # default-kind real literal: round through single precision
    return float(np.float32(value))


def _elemental(fn, npfn):
    def call(*args):
        if any(isinstance(a, ArrayObject) for a in args):
            return wrap_result(npfn(*[values_of(a) for a in args]))
        return fn(*args)
    return call


def _min(*args):
    if any(isinstance(a, ArrayObject) for a in args):
        out = values_of(args[0])
        for a in args[1:]:
            out = np.minimum(out, values_of(a))
        return wrap_result(out)
    return min(args)


def _max(*args):
    if any(isinstance(a, ArrayObject) for a in args):
        out = values_of(args[0])
        for a in args[1:]:
            out = np.maximum(out, values_of(a))
        return wrap_result(out)
    return max(args)


def _bound(which):
    def fn(a, dim=None):
        if not isinstance(a, ArrayObject):
            raise InterpreterError(f"{which} needs an array argument")
        bounds = a.lower if which == "lbound" else a.upper
        if dim is None:
            return ArrayObject(np.array(bounds, dtype=np.int64))
        return bounds[int(dim) - 1]
    return fn


def _size(a, dim=None):
    if not isinstance(a, ArrayObject):
        raise InterpreterError("size needs an array argument")
    return int(a.data.size if dim is None else a.data.shape[int(dim) - 1])


INTRINSIC_FUNCS = {
    "modulo": fortran_modulo,
    "mod": fortran_mod,
    "ceiling": lambda a: int(math.ceil(a)),
    "floor": lambda a: int(math.floor(a)),
    "real": _elemental(float, lambda a: np.asarray(a, dtype=np.float64)),
    "dble": _elemental(float, lambda a: np.asarray(a, dtype=np.float64)),
    "int": lambda a: int(a) if isinstance(a, (int, np.integer)) else math.trunc(a),
    "nint": nint,
    "abs": _elemental(abs, np.abs),
    "min": _min,
    "max": _max,
    "sqrt": _elemental(math.sqrt, np.sqrt),
    "exp": _elemental(math.exp, np.exp),
    "log": _elemental(math.log, np.log),
    "sin": _elemental(math.sin, np.sin),
    "cos": _elemental(math.cos, np.cos),
    "tan": _elemental(math.tan, np.tan),
    "sign": lambda a, b: abs(a) if b >= 0 else -abs(a),
    "dim3": lambda x, y, z: Dim3(int(x), int(y), int(z)),
    "lbound": _bound("lbound"),
    "ubound": _bound("ubound"),
    "size": _size,
    "sum": lambda a: values_of(a).sum() if isinstance(a, ArrayObject) else a,
    "huge": lambda a: (2 ** 31 - 1) if isinstance(a, int) else float(np.finfo(np.float64).max),
    "tiny": lambda a: float(np.finfo(np.float64).tiny),
    "epsilon": lambda a: float(np.finfo(np.float64).eps),
}


def _arith(op):
    def fn(a, b):
        if isinstance(a, ArrayObject) or isinstance(b, ArrayObject):
            return wrap_result(op(values_of(a), values_of(b)))
        return op(a, b)
    return fn


def _divide(a, b):
    if isinstance(a, ArrayObject) or isinstance(b, ArrayObject):
        return wrap_result(values_of(a) / values_of(b))
    return int_div(a, b)


def _power(a, b):
    if isinstance(a, ArrayObject) or isinstance(b, ArrayObject):
        return wrap_result(values_of(a) ** values_of(b))
    if isinstance(a, int) and isinstance(b, int) and b < 0:
        return int_div(1, a ** -b)
    return a ** b


BINOPS = {
    "+": _arith(operator.add),
    "-": _arith(operator.sub),
    "*": _arith(operator.mul),
    "/": _divide,
    "**": _power,
    "//": lambda a, b: a + b,
    "==": _arith(operator.eq),
    "/=": _arith(operator.ne),
    "<": _arith(operator.lt),
    "<=": _arith(operator.le),
    ">": _arith(operator.gt),
    ">=": _arith(operator.ge),
    ".eqv.": lambda a, b: bool(a) == bool(b),
    ".neqv.": lambda a, b: bool(a) != bool(b),
}


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "T" if v else "F"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, ArrayObject):
        return " ".join(format_value(x) for x in v.data.ravel(order="F"))
    return str(v)


@dataclass
class Scope:
    """Compile-time view of the names a routine (or module) can see."""

    locals: dict  # name -> SymbolSpec (None for implicit integers)
    module_cells: dict  # name -> Cell
    module_specs: dict  # name -> SymbolSpec
    routine: str = ""

    def spec(self, name: str) -> Optional[SymbolSpec]:
        if name in self.locals:
            return self.locals[name]
        return self.module_specs.get(name)

    def is_var(self, name: str) -> bool:
        return name in self.locals or name in self.module_cells

    def rank(self, name: str) -> int:
        s = self.spec(name)
        return s.rank if s is not None else 0

    def kind(self, name: str) -> Optional[str]:
        s = self.spec(name)
        return s.base_type if s is not None else "integer4"


@dataclass
class CompiledRoutine:
    decl: RoutineDecl
    scope: Scope
    body: Callable
    param_specs: list
    local_specs: list
    implicit: list
    dim_fns: dict
    value_fns: dict
    saved: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def is_kernel(self) -> bool:
        return self.decl.prefix == "global"


class Interpreter:
    """Execute a parsed Program.

    ``arch`` selects which ``@parallelRegion`` blocks loop (plain mode for
    annotated sources); ``emulate_kernels`` enables CUDA launches.
    """

    def __init__(self, program: Program, arch: str = "cpu", emulate_kernels: bool = False,
                 launch_order: str = "forward", seed: int = 0, hooks: Optional[dict] = None,
                 store_hook: Optional[Callable] = None):
        if launch_order not in LAUNCH_ORDERS:
            raise ValueError(f"launch_order must be one of {LAUNCH_ORDERS}")
        self.program = program
        self.arch = arch
        self.emulate_kernels = emulate_kernels
        self.launch_order = launch_order
        self.seed = seed
        self.hooks = dict(hooks or {})
        self.store_hook = store_hook
        self.transcript: list[str] = []
        self.launches = 0
        self._routines = {r.name: r for r in program.all_routines()}
        self._compiled: dict = {}
        self.module_cells: dict = {}
        self.module_specs: dict = {}
        for mod in program.modules:
            self._init_module(mod)

    # -- modules --------------------------------------------------------

    def _visible_modules(self, module: Optional[str], uses) -> tuple:
        cells, specs = {}, {}
        for use in uses:
            if use.module in IGNORED_MODULES:
                continue
            if use.module not in self.module_cells:
                raise InterpreterError(f"unknown module {use.module}")
            for name, cell in self.module_cells[use.module].items():
                if use.only is None or name in use.only:
                    cells[name] = cell
                    specs[name] = self.module_specs[use.module][name]
        if module is not None:
            cells.update(self.module_cells[module])
            specs.update(self.module_specs[module])
        return cells, specs

    def _init_module(self, mod) -> None:
        cells = {s.name: Cell(UNDEF, s.name) for s in mod.specs}
        specs = {s.name: s for s in mod.specs}
        self.module_cells[mod.name] = cells
        self.module_specs[mod.name] = specs
        vis_cells, vis_specs = self._visible_modules(None, mod.uses)
        vis_cells.update(cells)
        vis_specs.update(specs)
        scope = Scope({}, vis_cells, vis_specs, mod.name)
        for s in mod.specs:
            if s.is_pointer:
                cells[s.name].value = None
            elif s.value is not None:
                cells[s.name].value = to_kind(s.base_type, self.cexpr(s.value, scope)({}))
        self.allocate_module_arrays(mod.name)

    def allocate_module_arrays(self, module: str) -> None:
        """Allocate explicit-shape module arrays whose bounds are now known."""
        mod = self.program.module(module)
        cells, specs = self._visible_modules(module, mod.uses)
        scope = Scope({}, cells, specs, module)
        for s in mod.specs:
            cell = self.module_cells[module][s.name]
            if s.rank and not s.is_pointer and not any(d.deferred for d in s.dimensions):
                if isinstance(cell.value, ArrayObject):
                    continue
                try:
                    lower = [self.cexpr(d.lower, scope)({}) for d in s.dimensions]
                    upper = [self.cexpr(d.upper, scope)({}) for d in s.dimensions]
                except InterpreterError:
                    continue
                cell.value = ArrayObject.allocate(lower, upper, DTYPES.get(s.base_type, object), name=s.name)

    def module_cell(self, module: str, name: str) -> Cell:
        return self.module_cells[module][name]

    def get(self, module: str, name: str):
        return self.module_cells[module][name].value

    def set(self, module: str, name: str, value) -> None:
        spec = self.module_specs[module][name]
        if isinstance(value, ArrayObject) or spec.rank:
            self.module_cells[module][name].value = value
        else:
            self.module_cells[module][name].value = to_kind(spec.base_type, value)

    # -- compilation ----------------------------------------------------

    def routine(self, name: str) -> CompiledRoutine:
        cr = self._compiled.get(name)
        if cr is None:
            decl = self._routines.get(name)
            if decl is None:
                raise InterpreterError(f"call to unknown routine {name}")
            cr = self._compile_routine(decl)
            self._compiled[name] = cr
        return cr

    def _compile_routine(self, decl: RoutineDecl) -> CompiledRoutine:
        cells, specs = self._visible_modules(decl.module, decl.uses)
        locals_ = {s.name: s for s in decl.specs}
        implicit = []
        for p in decl.params:
            if p not in locals_:
                raise InterpreterError(f"dummy argument {p} of {decl.name} has no declaration", decl.origin)
        extra = []
        for s in walk_stmts(decl.body):
            if isinstance(s, Do):
                extra.append(s.var)
            elif isinstance(s, ParallelRegion):
                extra.extend(s.spec.domain_names)
        if decl.prefix == "global":
            extra.extend(CUDA_BUILTINS)
        for n in extra:
            if n not in locals_ and n not in implicit:
                if n in cells and n not in CUDA_BUILTINS:
                    continue
                implicit.append(n)
                locals_[n] = None
        scope = Scope(locals_, cells, specs, decl.name)
        dim_fns, value_fns = {}, {}
        for s in decl.specs:
            if s.rank and not any(d.deferred for d in s.dimensions):
                dim_fns[s.name] = [(self.cexpr(d.lower, scope), self.cexpr(d.upper, scope)) for d in s.dimensions]
            if s.value is not None:
                value_fns[s.name] = self.cexpr(s.value, scope)
        body = self.cblock(decl.body, scope)
        params = [locals_[p] for p in decl.params]
        local_specs = [s for s in decl.specs if s.name not in decl.params]
        return CompiledRoutine(decl, scope, body, params, local_specs, implicit, dim_fns, value_fns)

    def _cell_getter(self, name: str, sc: Scope):
        if name in sc.locals:
            return lambda f: f[name]
        if name in sc.module_cells:
            cell = sc.module_cells[name]
            return lambda f: cell
        raise InterpreterError(f"undeclared variable {name} in {sc.routine}")

    def cexpr(self, e, sc: Scope):
        if isinstance(e, Num):
            v = literal(e)
            return lambda f: v
        if isinstance(e, Str):
            v = e.value
            return lambda f: v
        if isinstance(e, Logical):
            v = e.value
            return lambda f: v
        if isinstance(e, Name):
            return self._cname(e.name, sc)
        if isinstance(e, Apply):
            return self._capply(e, sc)
        if isinstance(e, BinOp):
            left, right = self.cexpr(e.left, sc), self.cexpr(e.right, sc)
            if e.op == ".and.":
                return lambda f: bool(left(f)) and bool(right(f))
            if e.op == ".or.":
                return lambda f: bool(left(f)) or bool(right(f))
            op = BINOPS[e.op]
            return lambda f: op(left(f), right(f))
        if isinstance(e, UnOp):
            inner = self.cexpr(e.operand, sc)
            if e.op == "-":
                return lambda f: _arith(operator.sub)(0, inner(f)) if isinstance(inner(f), ArrayObject) else -inner(f)
            if e.op == "+":
                return inner
            return lambda f: not inner(f)
        if isinstance(e, Component):
            base = self.cexpr(e.base, sc)
            fld = e.field
            return lambda f: getattr(base(f), fld)
        if isinstance(e, Macro):
            raise InterpreterError(f"unexpanded storage-order macro {e.name}; preprocess the source first")
        raise InterpreterError(f"cannot evaluate {e!r}")

    def _cname(self, name: str, sc: Scope):
        if not sc.is_var(name):
            raise InterpreterError(f"undeclared variable {name} in {sc.routine}")
        getter = self._cell_getter(name, sc)

        def read(f):
            v = getter(f).value
            if v is UNDEF:
                raise InterpreterError(f"read of undefined variable {name} in {sc.routine}")
            return v
        return read

    def _subscripts(self, args, sc: Scope):
        fns = []
        has_slice = False
        for a in args:
            if isinstance(a, Slice):
                has_slice = True
                lo = self.cexpr(a.lower, sc) if a.lower is not None else None
                hi = self.cexpr(a.upper, sc) if a.upper is not None else None
                fns.append(("slice", lo, hi))
            else:
                fns.append(("index", self.cexpr(a, sc), None))
        return fns, has_slice

    @staticmethod
    def _eval_subs(fns, f):
        out = []
        for kind, a, b in fns:
            if kind == "slice":
                out.append((a(f) if a else None, b(f) if b else None, None))
            else:
                out.append(a(f))
        return out

    def _array_of(self, getter, name):
        def arr(f):
            v = getter(f).value
            if not isinstance(v, ArrayObject):
                raise InterpreterError(f"{name} is not an allocated/associated array")
            return v
        return arr

    def _capply(self, e: Apply, sc: Scope):
        name = e.name
        if sc.is_var(name):
            arr = self._array_of(self._cell_getter(name, sc), name)
            fns, has_slice = self._subscripts(e.args, sc)
            if has_slice:
                ev = self._eval_subs
                return lambda f: arr(f).section(ev(fns, f))
            idx = [fn for _, fn, _ in fns]
            if len(idx) == 1:
                a0 = idx[0]
                return lambda f: arr(f).get((a0(f),))
            if len(idx) == 2:
                a0, a1 = idx
                return lambda f: arr(f).get((a0(f), a1(f)))
            if len(idx) == 3:
                a0, a1, a2 = idx
                return lambda f: arr(f).get((a0(f), a1(f), a2(f)))
            return lambda f: arr(f).get(tuple(a(f) for a in idx))
        fn = INTRINSIC_FUNCS.get(name)
        if fn is None:
            raise InterpreterError(f"unknown function {name} in {sc.routine}")
        args = [self.cexpr(a, sc) for a in e.args]
        return lambda f: fn(*[a(f) for a in args])

    # -- statements -----------------------------------------------------

    def cblock(self, stmts, sc: Scope):
        fns = [fn for fn in (self.cstmt(s, sc) for s in stmts) if fn is not None]
        if not fns:
            return lambda f: None
        if len(fns) == 1:
            return fns[0]

        def run(f):
            for fn in fns:
                sig = fn(f)
                if sig:
                    return sig
            return None
        return run

    def cstmt(self, s, sc: Scope):
        try:
            return self._cstmt(s, sc)
        except InterpreterError as exc:
            if exc.origin is None and getattr(s, "origin", None):
                raise InterpreterError(str(exc), s.origin) from None
            raise

    def _cstmt(self, s, sc: Scope):
        if isinstance(s, Assign):
            return self._cassign(s, sc)
        if isinstance(s, PointerAssign):
            target = s.target
            if not isinstance(target, Name):
                raise InterpreterError("pointer assignment target must be a name")
            tcell = self._cell_getter(target.name, sc)
            if isinstance(s.value, Name) and sc.is_var(s.value.name):
                vcell = self._cell_getter(s.value.name, sc)

                def passign(f):
                    tcell(f).value = vcell(f).value
            else:
                val = self.cexpr(s.value, sc)

                def passign(f):
                    tcell(f).value = val(f)
            return passign
        if isinstance(s, Do):
            return self._cdo(s, sc)
        if isinstance(s, DoWhile):
            cond, body = self.cexpr(s.cond, sc), self.cblock(s.body, sc)

            def dowhile(f):
                while cond(f):
                    sig = body(f)
                    if sig == EXIT:
                        break
                    if sig == RETURN:
                        return RETURN
                return None
            return dowhile
        if isinstance(s, If):
            branches = [(self.cexpr(c, sc), self.cblock(b, sc)) for c, b in s.branches]
            else_body = self.cblock(s.else_body, sc) if s.else_body is not None else None

            def ifstmt(f):
                for cond, body in branches:
                    if cond(f):
                        return body(f)
                if else_body is not None:
                    return else_body(f)
                return None
            return ifstmt
        if isinstance(s, Call):
            return self._ccall(s, sc)
        if isinstance(s, Return):
            return lambda f: RETURN
        if isinstance(s, Exit):
            return lambda f: EXIT
        if isinstance(s, Cycle):
            return lambda f: CYCLE
        if isinstance(s, Print):
            items = [self.cexpr(i, sc) for i in s.items]

            def prnt(f):
                self.transcript.append(" ".join(format_value(i(f)) for i in items))
            return prnt
        if isinstance(s, IOStmt):
            text = s.text

            def io(f):
                raise InterpreterError(f"unsupported I/O statement: {text}", s.origin)
            return io
        if isinstance(s, ParallelRegion):
            return self._cregion(s, sc)
        if isinstance(s, Raw):
            return None
        raise InterpreterError(f"unsupported statement {type(s).__name__}")

    def _cassign(self, s: Assign, sc: Scope):
        val = self.cexpr(s.value, sc)
        t = s.target
        if isinstance(t, Name):
            getter = self._cell_getter(t.name, sc)
            if sc.rank(t.name):
                arr = self._array_of(getter, t.name)

                def whole(f):
                    a = arr(f)
                    a.data[...] = values_of(val(f))
                return whole
            kind = sc.kind(t.name)
            if kind in ("real8", "real4"):
                def assign_real(f):
                    getter(f).value = float(val(f))
                return assign_real

            def assign(f):
                getter(f).value = to_kind(kind, val(f))
            return assign
        if isinstance(t, Apply) and sc.is_var(t.name):
            arr = self._array_of(self._cell_getter(t.name, sc), t.name)
            fns, has_slice = self._subscripts(t.args, sc)
            name = t.name
            if has_slice:
                ev = self._eval_subs

                def section(f):
                    a = arr(f)
                    a.data[a.section_index(ev(fns, f))] = values_of(val(f))
                return section
            idx = [fn for _, fn, _ in fns]
            hook = self.store_hook

            def element(f):
                a = arr(f)
                key = tuple(i(f) for i in idx)
                v = val(f)
                a.set(key, v)
                if hook is not None:
                    hook(name, key, v)
            return element
        if isinstance(t, Component):
            base = self.cexpr(t.base, sc)
            fld = t.field

            def comp(f):
                setattr(base(f), fld, val(f))
            return comp
        raise InterpreterError(f"unsupported assignment target {t!r}")

    def _cdo(self, s: Do, sc: Scope):
        getter = self._cell_getter(s.var, sc)
        start, end = self.cexpr(s.start, sc), self.cexpr(s.end, sc)
        step = self.cexpr(s.step, sc) if s.step is not None else None
        body = self.cblock(s.body, sc)

        def do(f):
            a, b = int(start(f)), int(end(f))
            st = int(step(f)) if step is not None else 1
            if st == 0:
                raise InterpreterError("do loop step of zero", s.origin)
            count = max(0, (b - a + st) // st)
            cell = getter(f)
            v = a
            for _ in range(count):
                cell.value = v
                sig = body(f)
                if sig == EXIT:
                    return None
                if sig == RETURN:
                    return RETURN
                v += st
            cell.value = v
            return None
        return do

    def _cregion(self, s: ParallelRegion, sc: Scope):
        body = self.cblock(s.body, sc)
        if not s.spec.applies(self.arch):
            return body
        # first domain innermost, last outermost
        fn = body
        for d in s.spec.domains:
            fn = self._loop_fn(d.name, self.cexpr(d.start, sc), self.cexpr(d.end, sc), fn, sc)
        return fn

    def _loop_fn(self, var, start, end, body, sc):
        getter = self._cell_getter(var, sc)

        def loop(f):
            cell = getter(f)
            for v in range(int(start(f)), int(end(f)) + 1):
                cell.value = v
                sig = body(f)
                if sig == RETURN:
                    return RETURN
            return None
        return loop

    # -- calls ----------------------------------------------------------

    def _carg(self, a, sc: Scope):
        if isinstance(a, Name) and sc.is_var(a.name):
            getter = self._cell_getter(a.name, sc)
            if sc.rank(a.name):
                return lambda f: ("array", getter(f).value, getter(f))
            return lambda f: ("cell", getter(f))
        if isinstance(a, Apply) and sc.is_var(a.name):
            fns, has_slice = self._subscripts(a.args, sc)
            arr = self._array_of(self._cell_getter(a.name, sc), a.name)
            if has_slice:
                ev = self._eval_subs
                return lambda f: ("array", arr(f).section(ev(fns, f)), None)
            idx = [fn for _, fn, _ in fns]
            return lambda f: ("elem", arr(f), tuple(i(f) for i in idx))
        val = self.cexpr(a, sc)

        def value(f):
            v = val(f)
            return ("array", v, None) if isinstance(v, ArrayObject) else ("value", v)
        return value

    def _ccall(self, s: Call, sc: Scope):
        args = [self._carg(a, sc) for a in s.args]
        name = s.name
        if s.launch is not None:
            grid, block = self.cexpr(s.launch[0], sc), self.cexpr(s.launch[1], sc)

            def launch(f):
                self.launch(name, grid(f), block(f), [a(f) for a in args])
            return launch
        if name in self.hooks or name not in self._routines:
            def external(f):
                hook = self.hooks.get(name)
                if hook is None:
                    raise InterpreterError(f"call to unknown routine {name}", s.origin)
                hook(*[self._ref_value(r) for r in (a(f) for a in args)])
            return external

        def call(f):
            self.invoke(name, [a(f) for a in args])
        return call

    @staticmethod
    def _ref_value(ref):
        kind = ref[0]
        if kind == "cell":
            return ref[1].value
        if kind == "elem":
            return ref[1].get(ref[2])
        return ref[1]

    def _bind_array(self, spec, actual, lower, upper, writebacks):
        if isinstance(actual, tuple):  # element actual: sequence association from that element
            arr, idx = actual
            if not arr.data.flags.f_contiguous:
                raise InterpreterError(f"element sequence association needs contiguous storage for {spec.name}")
            flat = arr.data.reshape(-1, order="F")
            start = int(np.ravel_multi_index(arr._offset(idx), arr.data.shape, order="F"))
            data = flat[start:]
        else:
            data = actual.data
        shape = tuple(max(0, u - lo + 1) for lo, u in zip(lower, upper))
        if data.shape == shape:
            return ArrayObject(data, lower, spec.name)
        need = int(np.prod(shape))
        if data.size < need:
            raise InterpreterError(f"actual argument for {spec.name} has {data.size} elements, {need} required")
        if data.ndim == 1 or data.flags.f_contiguous:
            flat = data.reshape(-1, order="F") if data.ndim != 1 else data
            view = flat[:need].reshape(shape, order="F")
            if np.shares_memory(view, data):
                return ArrayObject(view, lower, spec.name)
        tmp = np.array(data.reshape(-1, order="F")[:need].reshape(shape, order="F"), order="F")
        writebacks.append(("copy", data, tmp))
        return ArrayObject(tmp, lower, spec.name)

    def _frame(self, cr: CompiledRoutine, refs: list):
        decl = cr.decl
        if len(refs) != len(decl.params):
            raise InterpreterError(f"{decl.name} expects {len(decl.params)} arguments, got {len(refs)}", decl.origin)
        frame: dict = {}
        writebacks: list = []
        arrays = []
        for pname, spec, ref in zip(decl.params, cr.param_specs, refs):
            if spec.rank:
                arrays.append((pname, spec, ref))
                continue
            kind = ref[0]
            if "value" in spec.attributes:
                v = self._ref_value(ref)
                frame[pname] = Cell(v.copy() if isinstance(v, Dim3) else to_kind(spec.base_type, v), pname)
            elif kind == "cell":
                frame[pname] = ref[1]
            elif kind == "elem":
                cell = Cell(ref[1].get(ref[2]), pname)
                writebacks.append(("elem", ref[1], ref[2], cell))
                frame[pname] = cell
            elif kind == "array":
                raise InterpreterError(f"array passed to scalar dummy {pname} of {decl.name}", decl.origin)
            else:
                frame[pname] = Cell(to_kind(spec.base_type, ref[1]), pname)
        for pname, spec, ref in arrays:
            if ref[0] == "elem":
                actual = (ref[1], ref[2])
            elif ref[0] == "array":
                actual = ref[1]
                if actual is None or not isinstance(actual, ArrayObject):
                    raise InterpreterError(f"unassociated array passed as {pname} to {decl.name}", decl.origin)
            else:
                raise InterpreterError(f"scalar passed to array dummy {pname} of {decl.name}", decl.origin)
            if spec.is_pointer:
                frame[pname] = ref[2] if ref[0] == "array" and ref[2] is not None else Cell(actual, pname)
            elif pname not in cr.dim_fns:
                if isinstance(actual, tuple):
                    raise InterpreterError(f"assumed-shape dummy {pname} needs an array actual")
                frame[pname] = Cell(ArrayObject(actual.data, None, pname), pname)
            else:
                dims = cr.dim_fns[pname]
                lower = [int(lo(frame)) for lo, _ in dims]
                upper = [int(hi(frame)) for _, hi in dims]
                frame[pname] = Cell(self._bind_array(spec, actual, lower, upper, writebacks), pname)
        return frame, writebacks

    def _init_locals(self, cr: CompiledRoutine, frame: dict) -> None:
        for spec in cr.local_specs:
            name = spec.name
            if spec.is_parameter:
                frame[name] = Cell(to_kind(spec.base_type, cr.value_fns[name](frame)), name)
            elif spec.has_save:
                cell = cr.saved.get(name)
                if cell is None:
                    cell = Cell(UNDEF, name)
                    if name in cr.value_fns:
                        cell.value = to_kind(spec.base_type, cr.value_fns[name](frame))
                    cr.saved[name] = cell
                frame[name] = cell
            elif spec.is_pointer:
                frame[name] = Cell(None, name)
            elif spec.rank:
                if name not in cr.dim_fns:
                    frame[name] = Cell(None, name)
                    continue
                dims = cr.dim_fns[name]
                lower = [int(lo(frame)) for lo, _ in dims]
                upper = [int(hi(frame)) for _, hi in dims]
                frame[name] = Cell(ArrayObject.allocate(lower, upper, DTYPES.get(spec.base_type, object), name=name),
                                   name)
            else:
                frame[name] = Cell(UNDEF, name)
        for name in cr.implicit:
            frame[name] = Cell(UNDEF, name)

    @staticmethod
    def _write_back(writebacks) -> None:
        for wb in writebacks:
            if wb[0] == "elem":
                _, arr, idx, cell = wb
                arr.set(idx, cell.value)
            else:
                _, data, tmp = wb
                flat = tmp.reshape(-1, order="F")
                target = data.reshape(-1, order="F")
                if np.shares_memory(target, data):
                    target[: flat.size] = flat
                else:
                    raise InterpreterError("cannot write back to a non-contiguous actual argument")

    def invoke(self, name: str, refs: list):
        cr = self.routine(name)
        if cr.is_kernel:
            raise InterpreterError(f"kernel {name} must be launched with <<< >>>", cr.decl.origin)
        frame, writebacks = self._frame(cr, refs)
        self._init_locals(cr, frame)
        cr.body(frame)
        self._write_back(writebacks)
        return None

    def launch(self, name: str, grid, block, refs: list) -> None:
        cr = self.routine(name)
        if not self.emulate_kernels:
            raise InterpreterError(f"kernel launch of {name} requires emulate_kernels=True", cr.decl.origin)
        if not cr.is_kernel:
            raise InterpreterError(f"{name} is not a global kernel", cr.decl.origin)
        grid = grid if isinstance(grid, Dim3) else Dim3(int(grid), 1, 1)
        block = block if isinstance(block, Dim3) else Dim3(int(block), 1, 1)
        self.launches += 1
        frame, writebacks = self._frame(cr, refs)
        blocks = [(x, y, z) for z in range(1, grid.z + 1) for y in range(1, grid.y + 1) for x in range(1, grid.x + 1)]
        threads = [(x, y, z) for z in range(1, block.z + 1) for y in range(1, block.y + 1)
                   for x in range(1, block.x + 1)]
        order = [(b, t) for b in blocks for t in threads]
        if self.launch_order == "reverse":
            order.reverse()
        elif self.launch_order == "seed":
            random.Random(self.seed + self.launches).shuffle(order)
        for b, t in order:
            self._init_locals(cr, frame)
            frame["blockidx"].value = Dim3(*b)
            frame["threadidx"].value = Dim3(*t)
            frame["blockdim"].value = block
            frame["griddim"].value = grid
            cr.body(frame)
        self._write_back(writebacks)

    # -- entry points ---------------------------------------------------

    def call(self, name: str, *args) -> list:
        """Call a routine with Python values; returns the final argument values."""
        refs = []
        for a in args:
            if isinstance(a, Cell):
                refs.append(("cell", a))
            elif isinstance(a, ArrayObject):
                refs.append(("array", a, None))
            else:
                refs.append(("cell", Cell(a)))
        self.invoke(name, refs)
        return [self._ref_value(r) for r in refs]
