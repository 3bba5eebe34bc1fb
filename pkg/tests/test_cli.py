import csv

import pytest

from conftest import NEGATIVE
from unifort.cli import main
from unifort.interpreter.harness import corpus_path

WEATHER = str(corpus_path("simple_weather.h90"))
TINY = ["--grid", "6,5,4", "--steps", "2"]


def test_transpile_writes_units(tmp_path, capsys):
    assert main(["transpile", WEATHER, "--target", "gpu-cuda", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "simple_weather.gpu-cuda.f90").is_file()
    assert (tmp_path / "storage_order.F90").is_file()
    assert "simple_weather.gpu-cuda.f90" in capsys.readouterr().out


def test_transpile_with_config(tmp_path):
    cfg = tmp_path / "build.cfg"
    cfg.write_text("STORAGE_ORDER_CPU_3 = KIJ\n")
    assert main(["transpile", WEATHER, "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert "energy(k, i, j)" in (tmp_path / "simple_weather.cpu-openmp.f90").read_text()


def test_transpile_diagnostics_exit_one(tmp_path, capsys):
    assert main(["transpile", str(NEGATIVE / "recursion.h90"), "--target", "gpu-cuda",
                 "--out-dir", str(tmp_path)]) == 1
    assert "recursion" in capsys.readouterr().err


def test_missing_source_is_usage_error(capsys):
    assert main(["transpile", "nope.h90"]) == 2
    assert "no such source file" in capsys.readouterr().err


def test_bad_arguments_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["perfmodel", "--machine", "tsubame-2.5", "--grid", "1,2"])
    assert exc.value.code == 2


def test_graph_prints_both_architectures(capsys):
    assert main(["graph", WEATHER]) == 0
    out = capsys.readouterr().out
    assert "digraph callgraph_cpu {" in out and "digraph callgraph_gpu {" in out


def test_perfmodel_text_csv_and_plot(tmp_path, capsys):
    out_csv, out_png = tmp_path / "m.csv", tmp_path / "m.png"
    for target in ("cpu1", "gpu"):
        assert main(["perfmodel", "--machine", "tsubame-2.5", "--target", target,
                     "--csv", str(out_csv), "--plot", str(out_png)]) == 0
    text = capsys.readouterr().out
    assert "cpu1 model time: 0.7394 s" in text
    assert "gpu model time: 0.04706 s" in text
    rows = list(csv.reader(out_csv.open()))
    assert rows[0][0] == "machine" and len(rows) == 3
    assert rows[2][1] == "gpu" and rows[2][9] == "0.04706"
    assert out_png.read_bytes()[:4] == b"\x89PNG"


def test_perfmodel_condition(capsys):
    assert main(["perfmodel", "--machine", "piz-daint", "--target", "condition", "--m-htod", "2"]) == 0
    assert "speedup threshold: 5.205" in capsys.readouterr().out


def test_perfmodel_errors_exit_one(capsys):
    assert main(["perfmodel", "--machine", "cray-1"]) == 1
    assert main(["perfmodel", "--machine", "tesla-k20x", "--target", "cpu"]) == 1
    err = capsys.readouterr().err
    assert "unknown machine" in err and "BW_H1C" not in err and "no BW_H metric" in err


def test_run_and_verify_dumps(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["run", *TINY, "--variant", "reference", "--dump", str(a)]) == 0
    assert main(["run", *TINY, "--variant", "gpu-cuda", "--dump", str(b)]) == 0
    assert main(["verify", "--dumps", str(a), str(b)]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_detects_difference(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    main(["run", "--grid", "6,5,4", "--steps", "2", "--dump", str(a)])
    main(["run", "--grid", "6,5,4", "--steps", "3", "--dump", str(b)])
    assert main(["verify", "--dumps", str(a), str(b)]) == 1


def test_verify_variants(capsys):
    assert main(["verify", *TINY, "--variants", "reference", "cpu-kij", "openacc"]) == 0
    out = capsys.readouterr().out
    assert "cpu-kij vs reference: PASS" in out and "openacc vs reference: PASS" in out


def test_unknown_variant_is_usage_error():
    assert main(["run", *TINY, "--variant", "fpga"]) == 2
    assert main(["verify", *TINY, "--variants", "reference"]) == 2
