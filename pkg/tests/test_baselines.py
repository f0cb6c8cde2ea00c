import cmath
import math

import numpy as np
import pytest

from downconversion import SimConfig
from downconversion.baselines import (
    classical_evolve,
    classical_trajectory,
    linearized_observables,
    linearized_trajectory,
    rotate_gauge,
)
from downconversion.meanfield import integrate_meanfield


def test_classical_vacuum_seed_is_stationary():
    out = classical_evolve(0j, 10.0, 1.0, np.linspace(0, 5, 6))
    assert all(s.alpha1 == 0 and s.alpha2 == 10.0 for s in out)


def test_classical_seeded_tanh_solution():
    # real gauge: a2(t) = a tanh(a (t0 - t)), a = sqrt(C/2)
    a1_0, a2_0 = 1e-3, 5.0
    C = a1_0**2 + 2 * a2_0**2
    a = math.sqrt(C / 2)
    t0 = math.atanh(a2_0 / a) / a
    t = np.linspace(0, 2 * t0, 41)
    out = classical_evolve(a1_0, a2_0, 1.0, t)
    a2 = np.array([s.alpha2.real for s in out])
    assert np.allclose(a2, a * np.tanh(a * (t0 - t)), atol=1e-8)
    assert max(abs(s.charge - C) for s in out) <= 1e-9 * C


def test_classical_complete_conversion():
    # a tiny seed converts the whole pump at t0 (pump amplitude crosses zero)
    a = math.sqrt((1e-8 + 200.0) / 2)
    # atanh(10/a) with 1 - 10/a formed without cancellation
    one_minus = (0.5e-8 / (a + 10.0)) / a
    t0 = 0.5 * math.log((2.0 - one_minus) / one_minus) / a
    out = classical_evolve(1e-4, 10.0, 1.0, [0.0, t0])
    assert abs(out[-1].alpha1) ** 2 / 200 == pytest.approx(1.0, abs=1e-8)
    assert abs(out[-1].alpha2) < 1e-6


def test_classical_rejects_nonfinite():
    with pytest.raises(ValueError):
        classical_evolve(complex(math.inf, 0), 1.0, 1.0, [0, 1])


def test_linearized_values():
    obs = linearized_observables(0.5, 2.0)
    assert obs.n1 == pytest.approx(math.sinh(1.0) ** 2)
    assert obs.var_p1 == pytest.approx(math.exp(-2.0) / 4)
    assert obs.var_x1 * obs.var_p1 == pytest.approx(1 / 16)
    with pytest.raises(ValueError):
        linearized_observables(0.1, -1.0)


def test_linearized_trajectory_scaled_time():
    tr = linearized_trajectory(SimConfig(n2_0=50.0, method="linearized", n_points=11, t_max_scaled=1.0))
    assert np.allclose(tr["n1"], np.sinh(tr.times) ** 2)
    assert tr.method == "linearized"


def test_rotate_gauge_preserves_numbers_and_moves_phases():
    tr = integrate_meanfield(20.0, n_points=21)
    K = cmath.exp(0.4j)
    rot = rotate_gauge(tr.columns, K, 0.3)
    assert np.array_equal(rot["n1"], tr["n1"])
    assert np.allclose(rot["a2"], tr["a2"] * cmath.exp(0.3j))
    assert np.allclose(rot["a1sq"], tr["a1sq"] * cmath.exp(0.7j))
    # quadrature variances are frame-dependent; their sum is not
    assert np.allclose(rot["var_x1"] + rot["var_p1"], tr["var_x1"] + tr["var_p1"])
    assert rotate_gauge(tr.columns, 1.0, 0.0) is tr.columns


def test_classical_matches_exact_seeded_gauge():
    # complex K and pump phase: the classical charge is still conserved
    cfg = SimConfig(n2_0=9.0, K=cmath.exp(0.5j), pump_phase=1.0, seed_alpha1=0.2, method="classical", n_points=51)
    tr = classical_trajectory(cfg)
    assert np.allclose(tr["manley_rowe"], tr["manley_rowe"][0], rtol=1e-9)
    assert np.all(tr["var_p1"] == 0)
