import os
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GOLDEN
from unifort.codegen.config import BuildConfig, TargetConfig, default_order, parse_order
from unifort.codegen.storage import family, storage_definitions, storage_table
from unifort.diagnostics import TranspileError
from unifort.frontend import parse_text
from unifort.frontend.ast import Call, Do, walk_stmts
from unifort.interpreter.harness import KIJ, cpu_build, corpus_path
from unifort.pipeline import transpile, write_units
from unifort.source import expand_line

GOLDEN_CASES = [
    ("simple_weather.h90", "cpu-openmp"),
    ("simple_weather.h90", "gpu-cuda"),
    ("simple_weather.h90", "gpu-openacc"),
    ("simple_weather.h90", "plain"),
    ("simple_weather_data_region.h90", "cpu-openmp"),
    ("simple_weather_data_region.h90", "gpu-openacc"),
    ("simple_weather_data_region.h90", "plain"),
]


@pytest.mark.parametrize("source,target", GOLDEN_CASES)
def test_golden_files(source, target):
    result = transpile([corpus_path(source)], target)
    unit = result.units[0]
    golden = GOLDEN / unit.path
    storage = GOLDEN / f"storage_order.{target}.F90"
    if os.environ.get("UNIFORT_UPDATE_GOLDEN"):
        golden.write_text(unit.text)
        storage.write_text(result.storage.text)
    assert unit.text == golden.read_text()
    assert result.storage.text == storage.read_text()


def test_output_is_deterministic(weather_source):
    a = transpile([weather_source], "gpu-cuda").units[0].text
    b = transpile([weather_source], "gpu-cuda").units[0].text
    assert a == b


# -- configuration -----------------------------------------------------------

def test_build_config_parses_both_syntaxes():
    cfg = BuildConfig.parse("CUDA_BLOCKSIZE_X = 64\n#define CUDA_BLOCKSIZE_Y 8\n"
                            "STORAGE_ORDER_CPU_3 = KIJ\n# a comment\nDEFAULT_BACKEND_GPU = openacc\n")
    assert cfg.block_size == (64, 8, 1)
    assert cfg.storage_order[("cpu", 3)] == KIJ
    assert cfg.target("gpu-openacc").backend == "openacc"


def test_build_config_rejects_unknown_keys_and_bad_permutations():
    with pytest.raises(TranspileError) as err:
        BuildConfig.parse("NOT_A_KEY = 1\n", "c.cfg")
    assert err.value.diagnostics[0].origin == ("c.cfg", 1)
    with pytest.raises(TranspileError):
        BuildConfig.parse("STORAGE_ORDER_CPU_3 = 1,1,2\n")


def test_template_block_size_override():
    cfg = BuildConfig.parse("CUDA_BLOCKSIZE_X_STENCIL = 128\n").target("gpu-cuda")
    assert cfg.block_for("STENCIL")[0] == 128
    assert cfg.block_for(None) == (32, 16, 1)


def test_order_parsing_and_defaults():
    assert parse_order("KIJ") == (3, 1, 2)
    assert parse_order("3,1,2") == (3, 1, 2)
    assert default_order("gpu", 3) == (1, 2, 3)
    assert default_order("cpu", 3) == (3, 2, 1)
    assert default_order("cpu", 2) == (1, 2)


@given(st.integers(min_value=1, max_value=7).flatmap(
    lambda r: st.permutations(list(range(1, r + 1)))))
def test_storage_macro_applies_permutation(order):
    rank = len(order)
    cfg = TargetConfig.for_target("cpu-openmp").with_order("cpu", rank, tuple(order))
    at_name, dom_name = family(rank)
    args = [f"x{n}" for n in range(rank)]
    table = storage_table(cfg)
    expanded = expand_line(f"a({at_name}({', '.join(args)}))", table)
    assert expanded.replace(" ", "") == "a(" + ",".join(args[p - 1] for p in order) + ")"
    gpu = expand_line(f"a({dom_name}({', '.join(args)}))", storage_table(cfg, gpu=True))
    assert gpu.replace(" ", "") == "a(" + ",".join(args) + ")"


def test_storage_definitions_have_both_branches():
    text = storage_definitions(TargetConfig.for_target("gpu-cuda"))
    assert "#ifdef GPU" in text and "#else" in text and "#endif" in text
    assert "#define AT(i,j,k) i, j, k" in text


# -- OpenMP --------------------------------------------------------------------

def test_openmp_region_and_loop_order(weather_source):
    text = transpile([weather_source], "cpu-openmp").unit("simple_weather").text
    assert "!$omp parallel do default(firstprivate) shared(energy, energy_surf, energy_pbl)" in text
    assert re.search(r"do j = 0, ny \+ 1\n\s+do i = 0, nx \+ 1", text)
    assert text.count("!$omp parallel do") == text.count("!$omp end parallel do") == 5


def test_openmp_kij_storage_permutes_accesses(weather_source):
    result = transpile([weather_source], "cpu-openmp", cpu_build(KIJ))
    text = result.units[0].text
    assert "energy(nz, 0:nx + 1, 0:ny + 1)" in text
    assert "call radiate(energy(:, i, j))" in text
    assert "energy_u(k, i, j) = energy(k, i, j)" in text
    assert "energy(AT(i, j, :))" in result.units[0].macro_text


def test_openmp_reduction_clause():
    src = ("module r\n  integer(4) :: n\ncontains\n  subroutine total(a, s)\n"
           "    real(8), intent(in) :: a(n)\n    real(8), intent(out) :: s\n"
           "    @domainDependant{attribute(autoDom)}\n    a\n    @end domainDependant\n"
           "    s = 0.0d0\n    @parallelRegion{domName(i), domSize(n), reduction(+:s)}\n"
           "    s = s + a(i)\n    @end parallelRegion\n  end subroutine\nend module\n")
    from unifort.source import RawSource
    text = transpile([RawSource.from_text(src, "r.h90")], "cpu-openmp").units[0].text
    assert "reduction(+:s)" in text
    acc = transpile([RawSource.from_text(src, "r.h90")], "gpu-openacc").units[0].text
    assert "reduction(+:s)" in acc


# -- CUDA ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def cuda_text():
    return transpile([corpus_path("simple_weather.h90")], "gpu-cuda").units[0].text


def test_cuda_kernels_named_per_routine(cuda_text):
    kernels = re.findall(r"attributes\(global\) subroutine (\w+)", cuda_text)
    assert kernels == ["hfk0_radiate", "hfk0_exchange_heat_with_boundary",
                       "hfk0_diffuse", "hfk1_diffuse", "hfk2_diffuse", "hfk3_diffuse"]
    assert "use cudafor" in cuda_text


def test_cuda_shifted_iterators(cuda_text):
    # regions starting at 0 shift the thread index down by one
    assert "i = (blockidx%x - 1) * blockdim%x + threadidx%x - 1" in cuda_text
    assert "if (i .gt. nx + 1 .or. j .gt. ny + 1) then" in cuda_text


def test_cuda_extends_inside_kernel_arrays(cuda_text):
    assert re.search(r"subroutine radiate\(energy\)\n(.*\n)*?\s+real\(8\), intent\(inout\) :: "
                     r"energy\(0:nx \+ 1, 0:ny \+ 1, nz\)", cuda_text)
    assert "energy(i, j, k) = energy(i, j, k) + radiation_intensity" in cuda_text


def test_cuda_copy_back_for_out_and_inout(cuda_text):
    diffuse = cuda_text[cuda_text.index("  subroutine diffuse("):]
    assert "energy_u(:, :, :) = energy_u_hfdev(:, :, :)" in diffuse
    assert "energy(:, :, :) = energy_hfdev(:, :, :)" not in diffuse  # intent(in): no copy back


def test_cuda_present_data_region_rejects_deferred_mirrors(data_region_source):
    with pytest.raises(TranspileError) as err:
        transpile([data_region_source], "gpu-cuda")
    assert {d.rule for d in err.value.diagnostics} == {"deferred-shape-transfer"}


def test_cuda_too_many_domains():
    src = ("module t\n  integer(4) :: n\ncontains\n  subroutine s(a)\n    real(8), intent(inout) :: a(n,n,n,n)\n"
           "    @domainDependant{attribute(autoDom)}\n    a\n    @end domainDependant\n"
           "    @parallelRegion{domName(i,j,k,l), domSize(n,n,n,n)}\n    a(i,j,k,l) = 0.0d0\n"
           "    @end parallelRegion\n  end subroutine\nend module\n")
    from unifort.source import RawSource
    with pytest.raises(TranspileError) as err:
        transpile([RawSource.from_text(src, "t.h90")], "gpu-cuda")
    assert err.value.diagnostics[0].rule == "too-many-domains"


def test_scheme_overrides_backend_when_architecture_matches():
    src = ("module sc\n  integer(4) :: n\ncontains\n  @scheme{openacc}\n  subroutine s(a)\n"
           "    real(8), intent(inout) :: a(n)\n    @domainDependant{attribute(autoDom)}\n    a\n"
           "    @end domainDependant\n    @parallelRegion{domName(i), domSize(n)}\n    a(i) = 1.0d0\n"
           "    @end parallelRegion\n  end subroutine\n  @end scheme\nend module\n")
    from unifort.source import RawSource
    result = transpile([RawSource.from_text(src, "sc.h90")], "gpu-cuda")
    assert result.generated.backends["s"] == "openacc"
    assert "!$acc parallel loop" in result.units[0].text


# -- OpenACC -------------------------------------------------------------------

def test_openacc_data_region(data_region_source):
    text = transpile([data_region_source], "gpu-openacc").units[0].text
    simulate = text[text.index("subroutine simulate"):text.index("end subroutine")]
    assert "!$acc enter data copyin(energy, energy_u, energy_surf, energy_pbl)" in simulate
    # one exit before the early return, one at the end
    assert simulate.count("!$acc exit data") == 2
    assert "!$acc parallel loop gang present(energy_u, energy)" in text
    assert "!$acc loop vector(32)" in text and "!$acc loop seq" in text


def test_openacc_without_data_region_transfers_per_kernel_routine(weather_source):
    text = transpile([weather_source], "gpu-openacc").units[0].text
    assert "!$acc enter data copyin(energy) create(energy_u)" in text


# -- emitted units ---------------------------------------------------------------

def test_write_units_and_provenance(tmp_path, weather_source):
    result = transpile([weather_source], "gpu-cuda")
    paths = write_units(result, tmp_path)
    assert sorted(p.name for p in paths) == ["simple_weather.gpu-cuda.f90", "storage_order.F90"]
    unit = result.units[0]
    line = next(n for n, t in enumerate(unit.lines, 1) if "cublock = dim3(32, 16, 1)" in t)
    assert unit.origin_of(line)[0].endswith("simple_weather.h90")


def test_emitted_cpu_source_reparses(weather_source):
    text = transpile([weather_source], "cpu-openmp").units[0].text
    prog = parse_text(text, "x.f90")
    run_physics = prog.routine("run_physics")
    loops = [s for s in walk_stmts(run_physics.body) if isinstance(s, Do)]
    assert [l.var for l in loops] == ["j", "i"]
    assert [c.name for c in walk_stmts(run_physics.body) if isinstance(c, Call)] == [
        "radiate", "exchange_heat_with_boundary", "exchange_heat_with_boundary"]
