import math

import numpy as np
import pytest

from downconversion import SimConfig, Trajectory
from downconversion.analysis import (
    conversion_efficiency,
    efficiency_sweep,
    extract_features,
    find_extremum_time,
    parabolic_vertex,
    pump_amplitude_minimum,
    run_model,
)
from downconversion.errors import AnalysisError
from downconversion.meanfield import t_conv, t_squeeze


def _traj(t, **cols):
    return Trajectory(np.asarray(t, dtype=float), {k: np.asarray(v) for k, v in cols.items()}, {})


def test_parabolic_vertex_exact_for_parabola():
    t = np.array([0.9, 1.0, 1.1])
    y = -(t - 1.037) ** 2 + 2.0
    tv, yv = parabolic_vertex(t, y)
    assert tv == pytest.approx(1.037, abs=1e-12)
    assert yv == pytest.approx(2.0, abs=1e-12)


def test_extremum_refines_between_grid_points():
    t = np.linspace(0, 3, 31)
    tr = _traj(t, y=np.sin(t))
    ex = find_extremum_time(tr, "y", "max")
    assert ex.time == pytest.approx(math.pi / 2, abs=1e-3)
    assert not ex.at_boundary


def test_extremum_on_boundary_warns():
    t = np.linspace(0, 1, 11)
    ex = find_extremum_time(_traj(t, y=t), "y", "max")
    assert ex.at_boundary and ex.index == 10 and "boundary" in ex.warning


def test_extremum_rejects_complex_column_and_short_series():
    t = np.linspace(0, 1, 11)
    with pytest.raises(AnalysisError):
        find_extremum_time(_traj(t, a2=t + 0j), "a2")
    assert find_extremum_time(_traj(t, a2=(t - 0.52) ** 2 + 0j), "abs_a2", "min").time == pytest.approx(0.52, abs=1e-9)
    with pytest.raises(AnalysisError):
        find_extremum_time(_traj([0, 1, 2], y=[0, 1, 0]), "y")
    with pytest.raises(ValueError):
        find_extremum_time(_traj(t, y=t), "y", "median")


def test_efficiency_bounds():
    t = np.linspace(0, 1, 5)
    tr = Trajectory(t, {"n1": np.array([0, 1, 2, 20.0000001, 3])}, {"n2_0": 10.0})
    eff = conversion_efficiency(tr, 10.0)
    assert eff.max() == 1.0
    bad = Trajectory(t, {"n1": np.array([0, 1, 2, 25.0, 3])}, {"n2_0": 10.0})
    with pytest.raises(AnalysisError):
        conversion_efficiency(bad, 10.0)
    assert conversion_efficiency(bad, 10.0, strict=False).max() == 1.25
    with pytest.raises(AnalysisError):
        conversion_efficiency(tr, 11.0)
    with pytest.raises(AnalysisError):
        conversion_efficiency(tr, 0.0)


def test_pump_amplitude_minimum_on_linear_crossing():
    t = np.linspace(0, 2, 21)
    tr = _traj(t, a2=(1.234 - t) * np.exp(0.3j))
    assert pump_amplitude_minimum(tr).time == pytest.approx(1.234, abs=1e-12)


def test_pump_amplitude_minimum_fallback_without_crossing():
    t = np.linspace(0, 2, 21)
    tr = _traj(t, a2=(t - 1.1) ** 2 + 0.5 + 0j)
    assert pump_amplitude_minimum(tr).time == pytest.approx(1.1, abs=1e-9)


def test_meanfield_features_match_closed_forms():
    n = 200.0
    cfg = SimConfig(n2_0=n, method="meanfield", n_points=801)
    f = extract_features(run_model(cfg), n)
    assert f.max_conversion_efficiency == pytest.approx(1.0, abs=1e-6)
    assert f.t_of_max_conversion == pytest.approx(t_conv(n), rel=1e-4)
    assert f.t_of_pump_amplitude_min == pytest.approx(t_conv(n), rel=1e-6)
    assert f.t_of_min_var_p1 == pytest.approx(t_conv(n), rel=1e-3)
    assert f.warnings == []


def test_run_model_dispatch():
    for m in ("classical", "linearized", "meanfield", "exact"):
        tr = run_model(SimConfig(n2_0=4.0, method=m, n_points=11))
        assert tr.method == m and len(tr) == 11


def test_meanfield_gauge_rotation_in_dispatch():
    cfg = SimConfig(n2_0=4.0, method="meanfield", n_points=11, pump_phase=0.5)
    tr = run_model(cfg)
    assert np.angle(tr["a2"][0]) == pytest.approx(0.5)


def test_features_without_pump():
    f = extract_features(run_model(SimConfig(n2_0=0.0, n_points=11)), 0.0)
    assert f.max_conversion_efficiency == 0.0


def test_sweep_records_failures_and_keeps_order():
    template = SimConfig(method="meanfield", n_points=101)
    rows = efficiency_sweep([5.0, -1.0, 20.0], template, threads=2)
    assert [r.n2_0 for r in rows] == [5.0, -1.0, 20.0]
    assert rows[1].error and math.isnan(rows[1].efficiency)
    assert rows[0].efficiency == pytest.approx(1.0, abs=1e-4)
    assert rows[2].t_of_max == pytest.approx(t_conv(20.0), rel=1e-3)
    assert t_squeeze(20.0) < rows[2].t_of_max
