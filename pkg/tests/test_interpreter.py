import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unifort.frontend import parse_text
from unifort.interpreter.engine import Interpreter
from unifort.interpreter.fields import compare_fields, dump_field, load_field, write_field
from unifort.interpreter.harness import VARIANTS, run_variant, verify
from unifort.interpreter.reference import WeatherSetup, run_reference
from unifort.interpreter.runtime import ArrayObject, InterpreterError, fortran_mod, fortran_modulo, int_div

SMALL = WeatherSetup(6, 5, 4, steps=3, diffusion_velocity=0.1)


def interp(body, decls="", arch="cpu", **kw):
    src = (f"module t\n  implicit none\n  integer(4) :: n = 4\n{decls}contains\n{body}end module\n")
    return Interpreter(parse_text(src, "t.f90"), arch=arch, **kw)


# -- scalar semantics -------------------------------------------------------------

@given(st.integers(-1000, 1000), st.integers(-50, 50).filter(lambda b: b != 0))
def test_integer_division_truncates_toward_zero(a, b):
    q = int_div(a, b)
    assert q * b + fortran_mod(a, b) == a
    assert abs(q) == abs(a) // abs(b)
    assert 0 <= fortran_modulo(a, abs(b)) < abs(b)


def test_integer_division_in_source():
    it = interp("  subroutine s(a, b, q)\n    integer(4), intent(in) :: a, b\n"
                "    integer(4), intent(out) :: q\n    q = a / b\n  end subroutine\n")
    assert it.call("s", -7, 2, 0)[2] == -3
    assert it.call("s", 7, -2, 0)[2] == -3
    with pytest.raises(InterpreterError, match="division by zero"):
        it.call("s", 1, 0, 0)


def test_real_assignment_to_integer_truncates():
    it = interp("  subroutine s(x, k)\n    real(8), intent(in) :: x\n    integer(4), intent(out) :: k\n"
                "    k = x\n  end subroutine\n")
    assert it.call("s", -2.7, 0)[1] == -2


def test_undefined_read_is_an_error():
    it = interp("  subroutine s(y)\n    real(8), intent(out) :: y\n    real(8) :: x\n    y = x\n  end subroutine\n")
    with pytest.raises(InterpreterError, match="undefined variable x"):
        it.call("s", 0.0)


# -- arrays -----------------------------------------------------------------------

def test_bounds_are_checked():
    it = interp("  subroutine s(a, i)\n    real(8), intent(inout) :: a(0:n)\n    integer(4), intent(in) :: i\n"
                "    a(i) = 1.0d0\n  end subroutine\n")
    arr = ArrayObject.allocate([0], [4])
    it.call("s", arr, 0)
    it.call("s", arr, 4)
    assert arr.get((0,)) == 1.0 and arr.get((4,)) == 1.0
    with pytest.raises(InterpreterError, match="out of bounds 0:4"):
        it.call("s", arr, 5)


def test_sequence_association_of_column():
    body = ("  subroutine outer(a)\n    real(8), intent(inout) :: a(n, n)\n    integer(4) :: j\n"
            "    do j = 1, n\n      call col(a(:, j), j)\n    end do\n  end subroutine\n"
            "  subroutine col(c, j)\n    real(8), intent(inout) :: c(n)\n    integer(4), intent(in) :: j\n"
            "    integer(4) :: i\n    do i = 1, n\n      c(i) = 10 * i + j\n    end do\n  end subroutine\n")
    it = interp(body)
    arr = ArrayObject.allocate([1, 1], [4, 4])
    it.call("outer", arr)
    assert arr.data[2, 1] == 10 * 3 + 2


def test_pointer_swap_aliases_without_copy():
    decls = "  real(8), dimension(:), pointer :: p, q, tmp\n"
    body = ("  subroutine swap()\n    tmp => p\n    p => q\n    q => tmp\n  end subroutine\n")
    it = interp(body, decls)
    a, b = ArrayObject.allocate([1], [2], fill=1.0), ArrayObject.allocate([1], [2], fill=2.0)
    it.set("t", "p", a)
    it.set("t", "q", b)
    it.call("swap")
    assert it.get("t", "p") is b and it.get("t", "q") is a


def test_print_goes_to_transcript():
    it = interp("  subroutine s()\n    print *, 'step', 3, 1.5d0\n  end subroutine\n")
    it.call("s")
    assert it.transcript == ["step 3 1.5"]


# -- regions and kernels ------------------------------------------------------------

REGION = ("  subroutine fill(a)\n    real(8), intent(inout) :: a(n)\n    integer(4) :: i\n"
          "    @parallelRegion{appliesTo(CPU), domName(i), domSize(n)}\n    a(i) = i\n"
          "    @end parallelRegion\n  end subroutine\n")


def test_region_loops_only_for_matching_architecture():
    src = f"module t\n  integer(4) :: n = 4\ncontains\n{REGION}end module\n"
    prog = parse_text(src, "t.h90")
    a = ArrayObject.allocate([1], [4], fill=0.0)
    Interpreter(prog, arch="cpu").call("fill", a)
    assert list(a.data) == [1.0, 2.0, 3.0, 4.0]


KERNEL = ("module k\n  use cudafor\n  integer(4) :: n = 5\ncontains\n"
          "  attributes(global) subroutine inc(a)\n    real(8), device :: a(n)\n    integer(4) :: i\n"
          "    i = (blockidx%x - 1) * blockdim%x + threadidx%x\n    if (i .gt. n) then\n      return\n    end if\n"
          "    a(i) = a(i) + i\n  end subroutine\n"
          "  subroutine host(a)\n    real(8), intent(inout) :: a(n)\n    type(dim3) :: g, b\n"
          "    g = dim3(2, 1, 1)\n    b = dim3(4, 1, 1)\n    call inc <<< g, b >>>(a)\n  end subroutine\nend module\n")


@pytest.mark.parametrize("order", ["forward", "reverse", "seed"])
def test_kernel_emulation_independent_of_thread_order(order):
    it = Interpreter(parse_text(KERNEL, "k.f90"), emulate_kernels=True, launch_order=order, seed=7)
    a = ArrayObject.allocate([1], [5], fill=0.0)
    it.call("host", a)
    assert list(a.data) == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert it.launches == 1


def test_kernel_launch_requires_emulation():
    it = Interpreter(parse_text(KERNEL, "k.f90"))
    with pytest.raises(InterpreterError, match="emulate_kernels"):
        it.call("host", ArrayObject.allocate([1], [5], fill=0.0))


def test_unknown_launch_order_rejected():
    with pytest.raises(ValueError):
        Interpreter(parse_text(KERNEL, "k.f90"), launch_order="sideways")


# -- field dumps ------------------------------------------------------------------------

@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=24, max_size=24))
def test_dump_load_roundtrip_is_exact(values):
    data = np.array(values).reshape(2, 3, 4)
    back, lower = load_field(dump_field(data, (0, 0, 1)))
    assert lower == (0, 0, 1)
    # -0.0 and 0.0 compare equal but must survive as distinct bit patterns too
    assert back.tobytes() == data.tobytes()


def test_dump_header_and_order(tmp_path):
    data = np.arange(8.0).reshape(2, 2, 2)
    text = write_field(tmp_path / "f.txt", data).read_text()
    lines = text.splitlines()
    assert lines[0] == "2 2 2 0 0 1"
    assert lines[1:3] == ["0 0 1 0", "0 0 2 1"]


def test_compare_fields_reports_location():
    a = np.zeros((3, 3, 3))
    b = a.copy()
    b[1, 2, 0] = 1e-6
    cmp = compare_fields(a, b, 1e-12)
    assert not cmp.passed and cmp.location == (1, 2, 1) and cmp.max_abs_diff == 1e-6
    assert compare_fields(a, a).passed
    with pytest.raises(ValueError):
        compare_fields(a, np.zeros((2, 2, 2)))


# -- harness ------------------------------------------------------------------------------

def test_reference_changes_field():
    energy0 = run_reference(WeatherSetup(6, 5, 4, steps=0))
    energy3 = run_reference(SMALL)
    assert energy3.shape == SMALL.shape
    assert not np.array_equal(energy0, energy3)


@pytest.mark.parametrize("variant", [v for v in VARIANTS if v != "reference"])
def test_every_variant_matches_reference(variant):
    ref = run_variant("reference", SMALL).energy
    got = run_variant(variant, SMALL).energy
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_cuda_variant_under_shuffled_and_reversed_launches():
    ref = run_variant("reference", SMALL).energy
    for order in ("reverse", "seed"):
        got = run_variant("gpu-cuda", SMALL, launch_order=order, seed=3).energy
        assert np.array_equal(got, ref)


def test_verify_and_aliases():
    results = verify(SMALL, ["cpu", "openacc"])
    assert set(results) == {"cpu", "openacc"} and all(r.passed for r in results.values())
    with pytest.raises(ValueError, match="unknown variant"):
        run_variant("fpga", SMALL)
