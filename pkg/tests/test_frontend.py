import pytest
from hypothesis import given
from hypothesis import strategies as st

from unifort.diagnostics import TranspileError
from unifort.frontend import load_program, parse_directive, parse_text, print_program
from unifort.frontend.ast import (
    Apply,
    BinOp,
    Call,
    DomainDependantSpec,
    Macro,
    Name,
    Num,
    ParallelRegion,
    ParallelRegionSpec,
    walk_stmts,
)
from unifort.frontend.expr import parse_expr
from unifort.frontend.printer import print_expr

SMALL = """module m
  implicit none
  integer(4) :: n
contains
  subroutine s(a)
    real(8), intent(inout) :: a(n)
    @domainDependant{attribute(autoDom), domName(i), domSize(n)}
    a
    @end domainDependant
    @parallelRegion{appliesTo(GPU), domName(i), domSize(n)}
    a(1) = a(1) + &
      & 1.0d0
    @end parallelRegion
  end subroutine
end module
"""


def test_parse_small_module():
    prog = parse_text(SMALL, "t.h90")
    mod = prog.module("m")
    routine = mod.routine("s")
    assert routine.params == ("a",)
    assert routine.spec("a").rank == 1
    regions = routine.regions()
    assert len(regions) == 1 and regions[0].spec.applies("gpu") and not regions[0].spec.applies("cpu")
    assert regions[0].spec.origin == ("t.h90", 10)


def test_print_parse_roundtrip_is_stable():
    once = print_program(parse_text(SMALL, "t.h90"))
    twice = print_program(parse_text(once, "t.h90"))
    assert once == twice


def test_region_directive_defaults_start_to_one_and_end_to_upper():
    spec = parse_directive("@parallelRegion{domName(i,j), domSize(0:nx+1,ny)}", ("f", 1))
    assert isinstance(spec, ParallelRegionSpec)
    assert spec.applies("cpu") and spec.applies("gpu")
    i, j = spec.domains
    assert print_expr(i.lower) == "0"
    assert print_expr(i.start) == "1" and print_expr(i.end) == "nx + 1"
    assert print_expr(j.start) == "1" and print_expr(j.end) == "ny"


def test_region_directive_explicit_bounds_and_reduction():
    spec = parse_directive("@parallelRegion{appliesTo(CPU), domName(i), domSize(n), startAt(2), endAt(n-1), "
                           "reduction(+:s)}", ("f", 1))
    assert spec.applies_to == frozenset({"cpu"})
    assert print_expr(spec.domains[0].start) == "2"
    assert spec.reductions == (("+", "s"),)


def test_domain_dependant_directive_flags():
    spec = parse_directive("@domainDependant{attribute(autoDom, present), domName(i,j), domSize(nx,ny)}", ("f", 1))
    assert isinstance(spec, DomainDependantSpec)
    assert {"autodom", "present"} <= {f.lower() for f in spec.flags}


def test_unknown_directive_attribute_is_diagnosed():
    with pytest.raises(TranspileError):
        parse_directive("@parallelRegion{domName(i), domSize(n), bogus(1)}", ("f", 7))


def test_expression_precedence():
    e = parse_expr("a + b * c ** 2")
    assert isinstance(e, BinOp) and e.op == "+"
    assert print_expr(e) == "a + b * c**2"
    assert print_expr(parse_expr("(a + b) * c")) == "(a + b) * c"


def test_macro_names_parse_as_macros():
    e = parse_expr("energy(AT(i, j, k))", macro_names=frozenset({"AT"}))
    assert isinstance(e, Apply) and isinstance(e.args[0], Macro)


def test_cuda_launch_parses():
    prog = parse_text("subroutine h(x)\n  real(8) :: x(4)\n  call k <<< g, b >>>(x)\nend subroutine\n", "h.f90")
    call = next(s for s in walk_stmts(prog.routines[0].body) if isinstance(s, Call))
    assert call.launch == (Name("g"), Name("b"))


def test_corpus_parses(weather_source, data_region_source):
    for src in (weather_source, data_region_source):
        prog = load_program([src])
        names = [r.name for r in prog.all_routines()]
        assert names == ["simulate", "run_physics", "radiate", "exchange_heat_with_boundary", "diffuse"]
        diffuse = prog.routine("diffuse")
        assert len(diffuse.regions()) == 4


def test_origins_survive_continuations(weather_source):
    prog = load_program([weather_source])
    region = prog.routine("run_physics").regions()[0]
    calls = [s for s in region.body if isinstance(s, Call)]
    # the second exchange call starts on its own physical line
    assert calls[1].origin[0].endswith("simple_weather.h90")
    assert calls[2].origin[1] > calls[1].origin[1]


@given(st.integers(min_value=0, max_value=10 ** 6), st.integers(min_value=0, max_value=10 ** 6))
def test_integer_literals_roundtrip(a, b):
    e = parse_expr(f"{a} - {b}")
    assert isinstance(e.left, Num) and e.left.value == a
    assert print_expr(e) == f"{a} - {b}"
