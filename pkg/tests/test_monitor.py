import csv
import json
import math

import numpy as np
import pytest

from mkdiss.errors import DomainError, ParameterError, ReportingError
from mkdiss.grid import GridSpec, RingConfig, gaussian_ring_vorticity
from mkdiss.harmonic import solve_M
from mkdiss.monitor import (CRITICAL, INCONCLUSIVE, ROW_COLUMNS, SUBCRITICAL, SUPERCRITICAL,
                            FrameworkConstants, _classify, amplification,
                            analyticity_radius, axial_vorticity, core_scale,
                            criticality_verdict, detect_escape_times, formula_layer_check,
                            local_existence, predicted_sparseness_scale, reynolds_threshold,
                            tetration_crossover)
from mkdiss.solver import Snapshot, Timeline, diagnostics


def test_core_scale_examples():
    assert core_scale(4 * math.pi, 1.0) == pytest.approx(1.0)
    assert core_scale(1.0, 400.0) == pytest.approx(0.5 * core_scale(1.0, 100.0))
    assert core_scale(1.0, 100.0) == pytest.approx(0.02821, abs=1e-5)
    with pytest.raises(ParameterError):
        core_scale(0.0, 1.0)


def test_amplification_identity(rng):
    assert amplification(1.0, 1.0) == 1.0
    assert amplification(1.0, 0.1) == pytest.approx(100.0)
    for _ in range(100):
        G, w, d0 = rng.uniform(0.1, 10.0, 3)
        back = amplification(d0, core_scale(G, w)) * axial_vorticity(G, d0)
        assert back == pytest.approx(w, rel=1e-12)
    with pytest.raises(ParameterError):
        amplification(-1.0, 1.0)


def test_analyticity_radius_examples():
    assert analyticity_radius(1.0, 1.0) == 1.0
    assert analyticity_radius(3.0, 4.0) == pytest.approx(2 * analyticity_radius(3.0, 1.0))
    assert analyticity_radius(40.0, 1e-3) == pytest.approx(5e-3)
    c = FrameworkConstants(c_star=2.0, c3=4.0)
    assert analyticity_radius(1.0, 1.0, c) == 0.5
    assert analyticity_radius(1.0, 1.0, c, mode="c3") == 0.25
    with pytest.raises(ParameterError):
        analyticity_radius(0.0, 1.0)
    with pytest.raises(ParameterError):
        FrameworkConstants(c4=0.0)


def test_local_existence_examples():
    le = local_existence(1.0, 1.0)
    assert le.T == 1.0
    assert le.radius_at(0.64) == pytest.approx(2 * le.radius_at(0.16))
    assert local_existence(10.0, 0.01, FrameworkConstants(c1_of_M=2.0)).T == pytest.approx(5e-4)
    # with c1 = c2^2 the width at T matches the analyticity radius with c_star = c2^2
    c = FrameworkConstants(c1_of_M=9.0, c2_of_M=3.0, c_star=9.0)
    le = local_existence(7.0, 0.2, c)
    assert le.radius_at(le.T) == pytest.approx(analyticity_radius(7.0, 0.2, c))
    with pytest.raises(DomainError):
        le.radius_at(2 * le.T)
    with pytest.raises(DomainError):
        le.radius_at(0.0)


def test_reynolds_threshold_examples():
    assert reynolds_threshold(1.0, 1.0)["satisfied"]
    r = reynolds_threshold(100.0, 1.0)
    assert not r["satisfied"] and r["ratio"] == 100.0 and r["bound"] == pytest.approx(4 * math.pi)
    assert reynolds_threshold(4 * math.pi, 1.0)["satisfied"]
    assert reynolds_threshold(4.0, 1.0, FrameworkConstants(c_star=2.0))["satisfied"] is False


def test_formula_layer_ratio_is_time_independent():
    out = formula_layer_check(1.0, 0.01, [1.0, 10.0, 1e4])
    assert out["ratio_spread"] < 1e-12
    assert out["delta_over_rho"] ** 2 == pytest.approx(out["delta_over_rho_squared"])
    assert not out["subcritical"] and out["matches_reynolds_threshold"]
    assert formula_layer_check(1.0, 1.0, [5.0])["subcritical"]
    with pytest.raises(ParameterError):
        formula_layer_check(1.0, 1.0, [])


def test_predicted_scale_k0_matches_rho_up_to_constant():
    nu = 0.04
    ratios = [predicted_sparseness_scale(w, 0) / analyticity_radius(w, nu, mode="c3")
              for w in (0.5, 3.0, 200.0)]
    assert ratios == pytest.approx([1 / math.sqrt(nu)] * 3)
    w = 50.0
    assert (predicted_sparseness_scale(w, 2, convention="reciprocal")
            == pytest.approx(predicted_sparseness_scale(w, 2, convention="direct")))
    assert predicted_sparseness_scale(w, 2) < predicted_sparseness_scale(w, 0)


def test_escape_time_examples():
    t = np.arange(5.0)
    assert detect_escape_times(t, [1, 2, 3, 4, 5]) == [0, 1, 2, 3]
    assert detect_escape_times(t, [2, 2, 2, 2, 2]) == []
    assert detect_escape_times(t, [1, 3, 2, 4, 5]) == [0, 2, 3]
    assert detect_escape_times([0.0], [1.0]) == []
    with pytest.raises(ParameterError):
        detect_escape_times([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ParameterError):
        detect_escape_times([], [])


def test_classification_rules():
    assert _classify([(0.1, 0.2), (0.3, 0.3)])[0] == SUBCRITICAL
    assert _classify([(0.3, 0.2), (0.2, 0.3)])[0] == CRITICAL
    assert _classify([(0.9, 0.2)])[0] == SUPERCRITICAL
    assert _classify([(math.inf, 0.2)])[0] == SUPERCRITICAL


def scaled_timeline(amplitudes):
    grid = GridSpec(16, 2 * math.pi)
    base = gaussian_ring_vorticity(RingConfig(1.0, 0.4, 1.0), grid)
    tl = Timeline()
    for j, a in enumerate(amplitudes):
        w = a * base
        tl.append(Snapshot(0.1 * j, w, diagnostics=diagnostics(w)))
    return tl


def test_decaying_run_is_inconclusive():
    res = criticality_verdict(scaled_timeline([3.0, 2.0, 1.0]), 1.0, 0.01)
    assert res.verdict == INCONCLUSIVE
    assert res.reason == "no escape times in the growth window"
    assert res.escape_rows() == []
    assert res.parameters["lambda"] == pytest.approx(solve_M().lam)
    assert all(r["r_s_measured"] is not None for r in res.rows)


def test_growing_run_classifies_escape_rows():
    tl = scaled_timeline([1.0, 2.0, 4.0])
    res = criticality_verdict(tl, 1.0, 0.01)
    esc = res.escape_rows()
    assert [r["t"] for r in esc] == pytest.approx([0.0, 0.1])
    # scaling the field leaves the level sets, hence r_s, unchanged
    rs = res.column("r_s_measured")
    assert rs[0] == rs[1] == rs[2]
    assert res.verdict == _classify([(r["r_s_measured"], r["rho_s"]) for r in esc])[0]
    pred = res.column("predicted_over_rho")
    assert np.allclose(pred, pred[0])
    window = criticality_verdict(tl, 1.0, 0.01, window=(0.05, 1.0), measure_all=False)
    assert [r["t"] for r in window.escape_rows()] == pytest.approx([0.1])
    assert window.rows[0]["r_s_measured"] is None


def test_verdict_needs_fields_and_valid_inputs():
    tl = Timeline()
    tl.append(Snapshot(0.0, None, None, {"omega_linf": 1.0, "omega_l1": 1.0}))
    tl.append(Snapshot(0.1, None, None, {"omega_linf": 2.0, "omega_l1": 1.0}))
    with pytest.raises(ReportingError):
        criticality_verdict(tl, 1.0, 0.1)
    with pytest.raises(ParameterError):
        criticality_verdict(Timeline(), 1.0, 0.1)
    with pytest.raises(ParameterError):
        criticality_verdict(tl, 1.0, 0.1, lam=1.5)


def test_report_files(tmp_path):
    res = criticality_verdict(scaled_timeline([1.0, 1.5]), 1.0, 0.05,
                              constants=FrameworkConstants(c3=2.0))
    paths = res.write(tmp_path / "v")
    data = json.loads(paths["json"].read_text())
    assert data["verdict"] == res.verdict
    assert data["parameters"]["constants"]["c3"] == 2.0
    assert set(data["series"]) == set(ROW_COLUMNS)
    lines = paths["csv"].read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert any(ln.startswith("# lambda = ") for ln in lines)
    rows = list(csv.reader(body))
    assert tuple(rows[0]) == ROW_COLUMNS and len(rows) == 3


def test_tetration_examples():
    one = tetration_crossover(1, 2.0)
    assert one.value == pytest.approx(math.exp(2.0)) and one.remaining == 0
    two = tetration_crossover(2, 1.0)
    assert two.value == pytest.approx(15.154262, rel=1e-7)
    assert two.log_value == pytest.approx(math.e)
    four = tetration_crossover(4, 10.0)
    assert four.height == 4 and four.levels == 1 and four.remaining == 3
    assert four.residual == pytest.approx(math.exp(10.0))
    assert math.isinf(four.value) and math.isinf(four.log_value)
    # iterated-log oracle: e^(e^10) is finite, so one more level overflows
    assert math.log(four.residual) == pytest.approx(10.0)
    three = tetration_crossover(3, 1.0)
    assert three.value == pytest.approx(math.exp(math.exp(math.e)))
    with pytest.raises(ParameterError):
        tetration_crossover(0, 1.0)
    with pytest.raises(ParameterError):
        tetration_crossover(2, -1.0)
