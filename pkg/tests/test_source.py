import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_statement
from unifort.diagnostics import TranspileError
from unifort.source import (
    MacroTable,
    RawSource,
    SourceKind,
    expand_line,
    merge_continuations,
    normalize_whitespace,
    preprocess,
    split_comment,
    split_line,
    split_lines,
)


def merged(text, path="t.f90"):
    return merge_continuations(RawSource.from_text(text, path))


def test_source_kind_from_extension():
    assert SourceKind.from_path("a.h90") is SourceKind.HYBRID
    assert SourceKind.from_path("a.F90").has_macros
    assert not SourceKind.from_path("a.f90").has_macros
    with pytest.raises(ValueError):
        SourceKind.from_path("a.c")


def test_two_line_merge():
    lines = merged("a = b &\n  & + c\n")
    assert len(lines) == 1
    assert normalize_whitespace(lines[0].text) == "a = b + c"
    assert lines[0].origin == [("t.f90", 1), ("t.f90", 2)]


def test_five_line_launch_merges_to_one_call():
    text = ("call hfk0_diffuse <<< cugrid, cublock >>>( &\n"
            "  & nz, diffusion_velocity, &\n"
            "  & nx, ny, &\n"
            "  & energy_u_hfdev, &\n"
            "  & energy_hfdev)\n")
    lines = merged(text)
    assert len(lines) == 1
    assert normalize_whitespace(lines[0].text) == normalize_whitespace(
        "call hfk0_diffuse <<< cugrid, cublock >>>( nz, diffusion_velocity, nx, ny, energy_u_hfdev, energy_hfdev)")
    assert [o[1] for o in lines[0].origin] == [1, 2, 3, 4, 5]


def test_comments_stay_separate_and_ampersand_in_string_is_not_continuation():
    lines = merged("! note &\nx = 'a &' // 'b'\n")
    texts = [l.text.strip() for l in lines]
    assert texts[0].startswith("!")
    assert texts[1] == "x = 'a &' // 'b'"


def test_split_comment_ignores_bang_in_string():
    code, comment = split_comment("x = 'a!b' ! real comment")
    assert code.rstrip() == "x = 'a!b'"
    assert comment.strip() == "! real comment"


def test_long_assignment_splits_and_remerges():
    line = "    x = " + " + ".join(f"a{i}(i, j, k)" for i in range(20))
    assert len(line) > 200
    pieces = split_line(line)
    assert len(pieces) >= 2 and all(len(p) <= 132 for p in pieces)
    assert all(p.rstrip().endswith("&") for p in pieces[:-1])
    again = merged("\n".join(pieces))
    assert normalize_whitespace(again[0].text) == normalize_whitespace(line)


def test_macro_arguments_are_not_split():
    line = "  y = " + " + ".join(f"energy(AT(i, j, k + {n}))" for n in range(12))
    for piece in split_line(line, 80):
        assert piece.count("AT(") == piece.count("AT(i, j, k")


def test_unsplittable_token_is_reported():
    with pytest.raises(TranspileError) as err:
        split_line("x = " + "a" * 200, 132, origin=("f.f90", 3))
    assert err.value.diagnostics[0].rule == "token-too-long"


def test_split_lines_keeps_short_text():
    text = "a = 1\nb = 2\n"
    assert split_lines(text) == text


def test_function_macro_expansion_and_comments_untouched():
    table = MacroTable()
    table.define_function("AT", ["i", "j", "k"], "k, i, j")
    assert expand_line("energy(AT(i, j, 1))", table) == "energy(1, i, j)"


def test_preprocess_conditionals():
    src = RawSource.from_text("#ifdef GPU\nx = 1\n#else\nx = 2\n#endif\n", "t.F90")
    table = MacroTable()
    assert "x = 2" in preprocess(src, table).text
    table.define("GPU", "1")
    assert "x = 1" in preprocess(src, table).text


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=60, max_value=200))
def test_roundtrip_property(seed, width):
    import random
    stmt = random_statement(random.Random(seed))
    try:
        pieces = split_line(stmt, width)
    except TranspileError:
        # only allowed when a single unbreakable unit exceeds the width
        assert width < 132
        return
    assert all(len(p) <= width for p in pieces)
    again = merged("\n".join(pieces) + "\n")
    assert len(again) == 1
    assert normalize_whitespace(again[0].text) == normalize_whitespace(stmt)
