import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from unifort.perfmodel import (
    HardwareMetrics,
    ModelError,
    ModelParams,
    arithmetic_intensity,
    compute_bound_threshold,
    cpu_model_time,
    get_machine,
    gpu_model_time,
    load_machines,
    model_report,
    offload_feasible,
    round_sig,
    speedup_lhs,
    speedup_rhs,
)
from unifort.plotting import model_curves, plot_model

bandwidth = st.floats(min_value=1.0, max_value=2000.0, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False)


def synthetic(bw_h, bw_d, bw_htod):
    return HardwareMetrics("synthetic", BW_H=bw_h, BW_D=bw_d, BW_HtoD=bw_htod)


def test_bundled_table_loads_and_names_normalize():
    table = load_machines()
    assert {"tsubame-2.5", "reedbush-h", "piz-daint", "tesla-k20x", "tesla-p100"} <= set(table)
    assert get_machine("TSUBAME2.5") == get_machine("tsubame-2.5")


def test_unknown_machine_lists_alternatives():
    with pytest.raises(ModelError, match="available: .*piz-daint"):
        get_machine("cray-1")


def test_missing_metric_names_field_and_providers():
    hw = get_machine("tesla-k20x")
    with pytest.raises(ModelError, match="no BW_H metric; machines providing it: .*piz-daint"):
        speedup_rhs(hw)


def test_invalid_metric_values_rejected():
    with pytest.raises(ModelError):
        HardwareMetrics("bad", BW_D=0.0)
    with pytest.raises(ModelError):
        ModelParams(0, 1, 1)


def test_custom_table_rejects_unknown_fields(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"machines": {"x": {"BW_D": 1.0, "FLUX": 2}}}))
    with pytest.raises(ModelError, match="FLUX"):
        load_machines(path)


def test_speedup_thresholds_frozen():
    # derived independently from the bundled bandwidths
    assert speedup_rhs(get_machine("tsubame-2.5")) == pytest.approx(5.398695, abs=1e-6)
    assert speedup_rhs(get_machine("reedbush-h")) == pytest.approx(8.280751, abs=1e-6)
    assert speedup_rhs(get_machine("piz-daint")) == pytest.approx(5.205184, abs=1e-6)


def test_speedup_rhs_rejects_slow_device():
    with pytest.raises(ModelError, match="never pay off"):
        speedup_rhs(synthetic(200.0, 100.0, 8.0))


def test_arithmetic_intensity_and_threshold():
    assert arithmetic_intensity(8, 8, 8) == 0.125
    assert arithmetic_intensity(16, 8, 2) == 1.0
    assert compute_bound_threshold(get_machine("tesla-k20x")) == pytest.approx(6.0803, abs=1e-4)
    with pytest.raises(ModelError):
        arithmetic_intensity(1, 0, 1)


def test_gpu_uncached_table_value_reference_only():
    # a printed 256^3 uncached value of 0.66 s does not follow from the formula; 0.822 does
    hw = get_machine("tesla-k20x")
    t = gpu_model_time(ModelParams.preset(256, 256, 256, cached=False), hw)
    assert t == pytest.approx(100 * (256 ** 3 * 8 * 10 / 169.4e9 + 256 ** 2 * 4 / 0.88e9))
    assert round(t, 3) == 0.822


def test_gpu_transfer_term():
    hw = get_machine("tsubame-2.5")
    base = ModelParams(64, 64, 64)
    with_transfer = replace(base, m_htod=2.0)
    extra = 100 * 64 ** 3 * 8 * 2.0 / (hw.BW_HtoD * 1e9)
    assert gpu_model_time(with_transfer, hw) - gpu_model_time(base, hw) == pytest.approx(extra)


def test_cpu_cores_argument_validated():
    with pytest.raises(ModelError):
        cpu_model_time(ModelParams(8, 8, 8), get_machine("tsubame-2.5"), "node")


def test_reports():
    hw = get_machine("tsubame-2.5")
    rep = model_report(hw, ModelParams.preset(128, 128, 128, cached=True), "cpu")
    assert "cpu model time: 0.382 s" in rep.text()
    assert len(rep.csv_row()) == len(rep.csv_header())
    cond = model_report(hw, ModelParams.preset(128, 128, 128, steps=100, m_htod=2.0), "condition")
    assert cond.verdict is True and "offload pays off" in cond.text()
    with pytest.raises(ModelError):
        model_report(hw, ModelParams(8, 8, 8), "tpu")


def test_round_sig():
    assert round_sig(0.0470563) == 0.04706
    assert round_sig(13.91372) == 13.91
    assert round_sig(0.0) == 0.0


def test_plot_and_curves(tmp_path):
    hw = get_machine("tsubame-2.5")
    curves = model_curves(hw, ModelParams(64, 64, 16))
    assert set(curves) == {"cpu1", "cpu", "gpu"}
    assert all(a[1] < b[1] for a, b in zip(curves["gpu"][1], curves["gpu"][1][1:]))
    only_gpu = model_curves(get_machine("tesla-k20x"), ModelParams(64, 64, 16))
    assert set(only_gpu) == {"gpu"}
    out = plot_model(hw, ModelParams(64, 64, 16), tmp_path / "m.png")
    assert out.read_bytes()[:4] == b"\x89PNG"


# -- properties ----------------------------------------------------------------

@given(bandwidth, bandwidth, bandwidth, bandwidth)
def test_rhs_increases_with_host_bandwidth(bw_a, bw_b, bw_d, bw_htod):
    lo, hi = sorted((bw_a, bw_b))
    if hi >= bw_d or lo == hi:
        return
    assert speedup_rhs(synthetic(lo, bw_d, bw_htod)) < speedup_rhs(synthetic(hi, bw_d, bw_htod))


@given(bandwidth, bandwidth, st.floats(min_value=0.1, max_value=10.0))
def test_rhs_scale_invariant(bw_h, bw_htod, ratio):
    # multiplying every bandwidth by the same factor leaves the threshold unchanged
    bw_d = bw_h * (1 + ratio)
    one = speedup_rhs(synthetic(bw_h, bw_d, bw_htod))
    two = speedup_rhs(synthetic(bw_h * 4, bw_d * 4, bw_htod * 4))
    assert two == pytest.approx(one, rel=1e-12)


@given(st.integers(1, 64), st.integers(1, 64), st.integers(1, 64), st.integers(0, 1000))
def test_times_linear_in_steps(nx, ny, nz, steps):
    hw = get_machine("tsubame-2.5")
    one = ModelParams(nx, ny, nz, steps=1)
    many = replace(one, steps=steps)
    for fn in (gpu_model_time, lambda p, m: cpu_model_time(p, m, "single")):
        assert fn(many, hw) == pytest.approx(steps * fn(one, hw), rel=1e-12, abs=0)


@given(st.integers(1, 128), st.integers(1, 128), st.integers(1, 128))
def test_halving_bandwidth_doubles_streaming_term(nx, ny, nz):
    hw = get_machine("tesla-k20x")
    p = ModelParams(nx, ny, nz)
    no_ra = replace(p, m_ra=0)
    slow = replace(hw, BW_D=hw.BW_D / 2)
    assert gpu_model_time(no_ra, slow) == pytest.approx(2 * gpu_model_time(no_ra, hw), rel=1e-12)


@given(st.integers(1, 10 ** 6), st.integers(1, 8), positive, bandwidth, bandwidth, bandwidth)
def test_feasibility_matches_float_comparison_away_from_boundary(n_i, m, m_htod, bw_h, bw_d, bw_htod):
    if bw_h >= bw_d:
        return
    hw = synthetic(bw_h, bw_d, bw_htod)
    lhs, rhs = speedup_lhs(n_i, m, m_htod), speedup_rhs(hw)
    if abs(lhs - rhs) > 1e-9 * max(lhs, rhs):
        assert offload_feasible(n_i, m, m_htod, hw) == (lhs > rhs)


def test_lhs_examples():
    machines = [get_machine(m) for m in ("tsubame-2.5", "reedbush-h", "piz-daint")]
    assert speedup_lhs(100, 10, 2) == 500
    assert all(offload_feasible(100, 10, 2, hw) for hw in machines)
    assert not any(offload_feasible(1, 3, 3, hw) for hw in machines)
    assert speedup_lhs(10, 4, 8) == 5 and not offload_feasible(10, 4, 8, machines[0])
    with pytest.raises(ModelError):
        speedup_lhs(1, 1, 0)


def test_small_derived_examples():
    assert arithmetic_intensity(0, 8, 8) == 0
    assert arithmetic_intensity(16, 8, 8) == 0.25
    assert compute_bound_threshold(HardwareMetrics("eq", P_D=42.0, BW_D=42.0)) == 1.0
    assert round(compute_bound_threshold(get_machine("tesla-p100")), 2) == 7.81
    assert cpu_model_time(ModelParams(8, 8, 8, steps=0), get_machine("tsubame-2.5")) == 0


def test_gpu_cached_table_value_reference_only():
    # the printed 128^3 cached value is 0.027 s; the formula with the bundled constants gives 0.047 s
    t = gpu_model_time(ModelParams.preset(128, 128, 128), get_machine("tesla-k20x"))
    assert round(t, 3) == 0.047


@given(bandwidth, bandwidth, bandwidth, bandwidth)
def test_rhs_decreases_with_link_bandwidth(bw_h, bw_d, link_a, link_b):
    lo, hi = sorted((link_a, link_b))
    if bw_h >= bw_d or lo == hi:
        return
    assert speedup_rhs(synthetic(bw_h, bw_d, lo)) > speedup_rhs(synthetic(bw_h, bw_d, hi))


@given(st.integers(1, 10 ** 6), st.integers(1, 8), st.integers(1, 64), st.integers(1, 1000))
def test_feasibility_invariant_under_common_rescaling(n_i, m, m_htod, factor):
    for name in ("tsubame-2.5", "reedbush-h", "piz-daint"):
        hw = get_machine(name)
        assert offload_feasible(n_i, m, m_htod, hw) == offload_feasible(n_i, m * factor, m_htod * factor, hw)
