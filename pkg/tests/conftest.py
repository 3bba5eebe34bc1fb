import random
import string
from pathlib import Path

import pytest

from unifort.interpreter.harness import corpus_path

TESTS = Path(__file__).resolve().parent
GOLDEN = TESTS / "golden"
NEGATIVE = TESTS / "fixtures" / "negative"

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}")


@pytest.fixture(scope="session")
def weather_source():
    return corpus_path("simple_weather.h90")


@pytest.fixture(scope="session")
def data_region_source():
    return corpus_path("simple_weather_data_region.h90")


_NAMES = ["energy", "energy_u", "a", "b", "diffusion_velocity", "nx", "ny", "nz", "x_hfdev", "boundary_level"]
_OPS = [" + ", " - ", " * ", " / ", " .and. ", " .gt. "]


def _operand(rng):
    kind = rng.randrange(5)
    if kind == 0:
        return rng.choice(_NAMES)
    if kind == 1:
        return f"{rng.choice(_NAMES)}({', '.join(rng.choice('ijk') for _ in range(rng.randint(1, 3)))})"
    if kind == 2:
        return f"{rng.randint(0, 999)}.{rng.randint(0, 99)}d0"
    if kind == 3:
        return f"AT({rng.choice('ijk')}, {rng.choice('ijk')}, k + {rng.randint(1, 9)})"
    text = "".join(rng.choice(string.ascii_letters + " ,!&") for _ in range(rng.randint(1, 20)))
    return "'" + text.replace("'", "") + "'"


def random_statement(rng: random.Random) -> str:
    """A random single-line statement, sometimes far longer than 132 characters."""
    n = rng.randint(1, 40)
    expr = _operand(rng)
    for _ in range(n):
        expr += rng.choice(_OPS) + _operand(rng)
    indent = " " * rng.choice([0, 2, 4, 6, 8])
    if rng.random() < 0.3:
        args = ", ".join(_operand(rng) for _ in range(rng.randint(1, 25)))
        return f"{indent}call some_routine({args})"
    return f"{indent}{rng.choice(_NAMES)}(i, j) = {expr}"


def random_statements(count: int, seed: int = 2024) -> list:
    rng = random.Random(seed)
    return [random_statement(rng) for _ in range(count)]
