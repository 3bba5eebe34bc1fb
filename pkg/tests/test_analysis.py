import pytest

from unifort.analysis import build_callgraph, build_model, color_callgraph, to_dot
from unifort.analysis.callgraph import INSIDE_KERNEL, KERNEL, KERNEL_CALLER, UNAFFECTED
from unifort.diagnostics import TranspileError
from unifort.frontend import load_program, parse_text


@pytest.fixture(scope="module")
def model(weather_source):
    return build_model(load_program([weather_source]))


def test_gpu_coloring(model):
    colors = {r: model.color(r, "gpu") for r in model.routines}
    assert colors == {
        "simulate": KERNEL_CALLER,
        "run_physics": KERNEL_CALLER,
        "radiate": KERNEL,
        "exchange_heat_with_boundary": KERNEL,
        "diffuse": KERNEL,
    }


def test_cpu_coloring(model):
    colors = {r: model.color(r, "cpu") for r in model.routines}
    assert colors == {
        "simulate": KERNEL_CALLER,
        "run_physics": KERNEL,
        "radiate": INSIDE_KERNEL,
        "exchange_heat_with_boundary": INSIDE_KERNEL,
        "diffuse": KERNEL,
    }


def test_call_graph_edges(model):
    g = model.graph
    assert sorted(g.callees("simulate")) == ["diffuse", "run_physics"]
    assert sorted(g.callers("radiate")) == ["run_physics"]
    assert not any(g.on_cycle(n) for n in g.nodes)


def test_dot_output(weather_source):
    graph = build_callgraph(load_program([weather_source]))
    dot = to_dot(graph, color_callgraph(graph, "gpu"), "gpu")
    assert dot.startswith("digraph callgraph_gpu {")
    assert '"radiate" [label="radiate [kernel]"];' in dot
    assert '"simulate" -> "run_physics";' in dot
    cpu = to_dot(graph, color_callgraph(graph, "cpu"), "cpu")
    assert '"run_physics" [label="run_physics [kernel]"];' in cpu


def test_empty_program_gives_empty_digraph():
    graph = build_callgraph(parse_text("module e\nend module\n", "e.f90"))
    assert to_dot(graph, color_callgraph(graph, "cpu"), "cpu") == "digraph callgraph_cpu {\n}\n"


def test_unaffected_routine():
    src = ("module u\ncontains\n  subroutine lone(x)\n    real(8), intent(inout) :: x\n"
           "    x = 1.0d0\n  end subroutine\nend module\n")
    graph = build_callgraph(parse_text(src, "u.f90"))
    assert color_callgraph(graph, "gpu")["lone"] == UNAFFECTED


def test_recursion_detected_in_strict_mode():
    src = ("module r\n  integer(4) :: n\ncontains\n"
           "  subroutine k(a)\n    real(8), intent(inout) :: a(n)\n"
           "    @parallelRegion{appliesTo(GPU), domName(i), domSize(n)}\n    call f(a(i))\n    @end parallelRegion\n"
           "  end subroutine\n"
           "  subroutine f(x)\n    real(8), intent(inout) :: x\n    call f(x)\n  end subroutine\nend module\n")
    graph = build_callgraph(parse_text(src, "r.h90"))
    assert graph.on_cycle("f")
    colors, diags = color_callgraph(graph, "gpu", strict=False)
    assert colors["f"] == INSIDE_KERNEL


def test_domain_extension_records(model):
    rec = model.symbols.lookup("radiate", "energy")
    domains = rec.logical_domains()
    assert [(d.name, d.parallel) for d in domains] == [("i", True), ("j", True), ("k", False)]
    assert rec.extended(True) and not rec.extended(False)


def test_module_pointer_record(model):
    rec = model.symbols.lookup("simulate", "energy")
    assert rec.owner == "simple_weather" and rec.spec.is_pointer and rec.directive is None


def test_undeclared_symbol_is_diagnosed():
    src = ("module q\ncontains\n  subroutine s(x)\n    real(8), intent(inout) :: x\n"
           "    x = y\n  end subroutine\nend module\n")
    with pytest.raises(TranspileError):
        build_model(parse_text(src, "q.f90"))
