"""Comparison layers: classical c-number amplitudes and the undepleted-pump
(linearized) squeezing solution."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .config import SimConfig
from .errors import IntegrationError
from .observables import Observables, Trajectory, quadrature_variances


@dataclass(frozen=True)
class ClassicalState:
    alpha1: complex
    alpha2: complex
    time: float

    @property
    def charge(self) -> float:
        """Classical Manley-Rowe charge ``|alpha1|^2 + 2 |alpha2|^2``."""
        return abs(self.alpha1) ** 2 + 2.0 * abs(self.alpha2) ** 2


def classical_evolve(alpha1_0, alpha2_0, K, t_grid, rtol: float = 1e-12) -> list[ClassicalState]:
    """Integrate ``a1' = K a2 conj(a1)``, ``a2' = -(conj(K)/2) a1^2`` in raw time.

    Raises :class:`IntegrationError` on non-finite growth or when the
    conserved charge drifts by more than 1e-9 relative.
    """
    K = complex(K)
    t_grid = np.asarray(t_grid, dtype=float)
    y0 = np.array([alpha1_0, alpha2_0], dtype=complex)
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial amplitudes must be finite")

    def rhs(_, y):
        a1 = y[0] + 1j * y[1]
        a2 = y[2] + 1j * y[3]
        d1 = K * a2 * a1.conjugate()
        d2 = -0.5 * K.conjugate() * a1 * a1
        return (d1.real, d1.imag, d2.real, d2.imag)

    charge0 = abs(y0[0]) ** 2 + 2 * abs(y0[1]) ** 2
    scale = max(math.sqrt(charge0), 1e-300)
    sol = solve_ivp(
        rhs,
        (t_grid[0], t_grid[-1]),
        (y0[0].real, y0[0].imag, y0[1].real, y0[1].imag),
        method="DOP853",
        t_eval=t_grid,
        rtol=rtol,
        atol=rtol * scale * 1e-3,
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise IntegrationError(f"classical integration failed: {sol.message}", module="baselines", time=float(sol.t[-1]))
    a1 = sol.y[0] + 1j * sol.y[1]
    a2 = sol.y[2] + 1j * sol.y[3]
    states = [ClassicalState(complex(x), complex(z), float(t)) for x, z, t in zip(a1, a2, sol.t)]
    if charge0 > 0:
        charge = np.abs(a1) ** 2 + 2 * np.abs(a2) ** 2
        drift = float(np.max(np.abs(charge - charge0)) / charge0)
        if drift > 1e-9:
            raise IntegrationError(f"classical charge drift {drift:.3g} exceeds 1e-9", module="baselines", time=float(t_grid[-1]))
    return states


def linearized_observables(t: float, alpha2_0: float, K: float = 1.0) -> Observables:
    """Undepleted-pump result: ``S(eta)`` acting on vacuum with ``eta = K alpha2_0 t``."""
    if alpha2_0 < 0:
        raise ValueError("alpha2_0 must be >= 0 (real gauge)")
    eta = K * alpha2_0 * t
    n1 = math.sinh(eta) ** 2
    n2 = alpha2_0**2
    return Observables(
        n1=n1,
        n2=n2,
        a1=0j,
        a2=complex(alpha2_0),
        a1sq=complex(0.5 * math.sinh(2 * eta)),
        var_x1=0.25 * math.exp(2 * eta),
        var_p1=0.25 * math.exp(-2 * eta),
        var_x2=0.25,
        var_p2=0.25,
        norm2=1.0,
        manley_rowe=n1 + 2 * n2,
    )


def rotate_gauge(columns: dict, K: complex, pump_phase: float) -> dict:
    """Map real-gauge columns onto a run with complex ``K`` and pump phase.

    The substitution ``a2 -> a2 e^{i phi}``, ``a1 -> a1 e^{i (kappa + phi)/2}``
    with ``kappa = arg K`` carries real-gauge solutions to general ones.
    """
    kappa = cmath.phase(complex(K))
    if kappa == 0 and pump_phase == 0:
        return columns
    out = dict(columns)
    rot2 = cmath.exp(1j * pump_phase)
    rot1 = cmath.exp(0.5j * (kappa + pump_phase))
    out["a2"] = np.asarray(columns["a2"]) * rot2
    out["a1"] = np.asarray(columns["a1"]) * rot1
    out["a1sq"] = np.asarray(columns["a1sq"]) * rot1**2
    if "beta" in columns:
        out["beta"] = np.asarray(columns["beta"]) * rot2
    out["var_x1"], out["var_p1"] = quadrature_variances(columns["n1"], out["a1"], out["a1sq"])
    if "a2sq" in columns:
        out["a2sq"] = np.asarray(columns["a2sq"]) * rot2**2
    return out


def linearized_trajectory(config: SimConfig) -> Trajectory:
    taus = config.scaled_grid()
    t_raw = taus / config.time_scale
    amp = math.sqrt(config.n2_0)
    pts = [linearized_observables(t, amp, abs(config.K)) for t in t_raw]
    traj = Trajectory.from_points(taus, pts, meta={"method": "linearized", "n2_0": config.n2_0})
    traj.columns = rotate_gauge(traj.columns, config.K, config.pump_phase)
    return traj


def classical_trajectory(config: SimConfig) -> Trajectory:
    """Classical amplitudes on the config grid; variances are zero for c-numbers."""
    taus = config.scaled_grid()
    t_raw = taus / config.time_scale
    states = classical_evolve(config.seed_alpha1, config.pump_amplitude, config.K, t_raw)
    a1 = np.array([s.alpha1 for s in states])
    a2 = np.array([s.alpha2 for s in states])
    n1 = np.abs(a1) ** 2
    n2 = np.abs(a2) ** 2
    zeros = np.zeros_like(taus)
    columns = {
        "n1": n1,
        "n2": n2,
        "a1": a1,
        "a2": a2,
        "a1sq": a1**2,
        "var_x1": zeros,
        "var_p1": zeros.copy(),
        "var_x2": zeros.copy(),
        "var_p2": zeros.copy(),
        "norm2": np.ones_like(taus),
        "manley_rowe": n1 + 2 * n2,
    }
    return Trajectory(taus, columns, {"method": "classical", "n2_0": config.n2_0})
