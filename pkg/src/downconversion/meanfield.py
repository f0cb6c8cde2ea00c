"""Mean-field pendulum reduction.

With the pump replaced by its mean, the sub-harmonic evolves by a pure
squeeze ``S(eta)`` and the pump by a displacement. The squeeze parameter
obeys the anharmonic pendulum

    eta'' = -(K^2 / 4) sinh(2 eta),   eta(0) = 0,   eta'(0) = K <a2(0)>

with first integral ``(2/K^2) eta'^2 + sinh^2 eta = 2 n2_0``. Everything
here works in scaled time ``tau = K sqrt(n2_0) t``, where the pendulum reads
``d^2 eta/d tau^2 = -sinh(2 eta) / (4 n2_0)`` with unit initial velocity.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import IntegrationError
from .observables import Trajectory, quadrature_variances


def eta_max(n2_0: float) -> float:
    """Turning point of the pendulum: ``sinh^2 eta_max = 2 n2_0``."""
    if n2_0 < 0:
        raise ValueError("n2_0 must be >= 0")
    return math.asinh(math.sqrt(2.0 * n2_0))


def _conv_integrand(s: float, ymax: float) -> float:
    # y = ymax (1 - s^2); n - sinh(y)^2/2 = sinh(ymax - y) sinh(ymax + y) / 2
    if s == 0.0:
        return 2.0 * ymax / math.sqrt(0.5 * ymax * math.sinh(2.0 * ymax))
    u = ymax * s * s
    return 2.0 * ymax * s / math.sqrt(0.5 * math.sinh(u) * math.sinh(2.0 * ymax - u))


def t_conv(n2_0: float) -> float:
    """Scaled optimum conversion time ``K sqrt(n2_0) T_conv``.

    ``T_conv`` is the first turning point of the pendulum,
    ``K T_conv = int_0^ymax dy / sqrt(n2_0 - sinh^2(y)/2)``. The inverse
    square-root endpoint singularity is removed by ``y = ymax (1 - s^2)``,
    which leaves a smooth integrand on ``[0, 1]``.
    """
    if not n2_0 > 0:
        raise ValueError("t_conv needs n2_0 > 0")
    ymax = eta_max(n2_0)
    value, _ = quad(_conv_integrand, 0.0, 1.0, args=(ymax,), epsabs=1e-13, epsrel=1e-13, limit=200)
    return math.sqrt(n2_0) * value


def t_squeeze(n2_0: float) -> float:
    """Scaled time of maximum squeezing, half the conversion time."""
    return 0.5 * t_conv(n2_0)


def mf_min_p_variance(n2_0: float) -> float:
    """Mean-field squeezing floor ``1 / (32 n2_0)``.

    This is the large-``n2_0`` form of ``exp(-2 eta_max) / 4``.
    """
    if not n2_0 > 0:
        raise ValueError("n2_0 must be > 0")
    return 1.0 / (32.0 * n2_0)


def phase_noise_min_p_variance(n2_0: float) -> float:
    """Squeezing floor ``1 / (8 sqrt(n2_0))`` once pump phase noise is included.

    Quoted from short-time perturbation theory; used only as a reference
    scale for the exact simulation.
    """
    if not n2_0 > 0:
        raise ValueError("n2_0 must be > 0")
    return 1.0 / (8.0 * math.sqrt(n2_0))


def energy_integral(eta, eta_dot, K: float = 1.0):
    """``(2/K^2) eta_dot^2 + sinh^2 eta``; constant ``2 n2_0`` on solutions."""
    return 2.0 / K**2 * np.asarray(eta_dot) ** 2 + np.sinh(np.asarray(eta)) ** 2


def integrate_meanfield(
    n2_0: float,
    K: float = 1.0,
    t_max: Optional[float] = None,
    tol: float = 1e-10,
    n_points: int = 400,
    t_grid=None,
) -> Trajectory:
    """Integrate the pendulum and derive all mean-field observables.

    Times (``t_max``, ``t_grid`` and the returned ``times``) are scaled,
    ``tau = K sqrt(n2_0) t``; for ``n2_0 = 0`` they are ``K t``. The result
    carries ``eta``, ``eta_dot`` (raw-time derivative) and ``beta`` columns,
    and ``meta["turning_times"]`` lists the zeros of ``eta_dot``.

    Raises :class:`IntegrationError` when the first integral drifts by more
    than ``100 tol`` relative to ``2 n2_0``.
    """
    if not (math.isfinite(n2_0) and n2_0 >= 0):
        raise ValueError("n2_0 must be finite and >= 0")
    if not K > 0:
        raise ValueError("K must be > 0")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if t_grid is None:
        if t_max is None:
            t_max = 2.0 * t_conv(n2_0) if n2_0 > 0 else 1.0
        t_grid = np.linspace(0.0, t_max, n_points)
    taus = np.asarray(t_grid, dtype=float)
    amp = math.sqrt(n2_0)
    meta = {"method": "meanfield", "n2_0": n2_0, "K": K, "tol": tol, "turning_times": []}

    if n2_0 == 0:
        eta = np.zeros_like(taus)
        deta = np.zeros_like(taus)
        meta["energy_drift"] = 0.0
    else:
        inv4n = 1.0 / (4.0 * n2_0)

        def rhs(_, y):
            return (y[1], -inv4n * math.sinh(2.0 * y[0]))

        def turning(_, y):
            return y[1]

        turning.direction = 0
        sol = solve_ivp(
            rhs,
            (taus[0], taus[-1]),
            (0.0, 1.0),
            method="DOP853",
            t_eval=taus,
            events=turning,
            rtol=min(tol, 1e-3) * 1e-2,
            atol=min(tol, 1e-3) * 1e-4,
        )
        if not sol.success:
            t_fail = float(sol.t[-1]) if len(sol.t) else float(taus[0])
            raise IntegrationError(sol.message, module="meanfield", time=t_fail)
        eta, deta = sol.y
        # scaled-time velocity -> K <a2> = raw-time velocity
        meta["turning_times"] = [float(t) for t in sol.t_events[0]]
        energy = 2.0 * n2_0 * deta**2 + np.sinh(eta) ** 2
        drift = float(np.max(np.abs(energy - 2.0 * n2_0)) / (2.0 * n2_0))
        meta["energy_drift"] = drift
        if drift > 100.0 * tol:
            bad = int(np.argmax(np.abs(energy - 2.0 * n2_0)))
            raise IntegrationError(
                f"energy integral drift {drift:.3g} exceeds 100*tol", module="meanfield", time=float(taus[bad])
            )

    a2 = amp * deta + 0j if n2_0 > 0 else np.full_like(taus, 0j, dtype=complex)
    sh = np.sinh(eta)
    n1 = sh**2
    a1sq = 0.5 * np.sinh(2.0 * eta) + 0j
    a1 = np.zeros_like(taus, dtype=complex)
    var_x1, var_p1 = quadrature_variances(n1, a1, a1sq)
    n2 = n2_0 - 0.5 * n1
    columns = {
        "n1": n1,
        "n2": n2,
        "a1": a1,
        "a2": a2,
        "a1sq": a1sq,
        "var_x1": var_x1,
        "var_p1": var_p1,
        "var_x2": np.full_like(taus, 0.25),
        "var_p2": np.full_like(taus, 0.25),
        "norm2": np.ones_like(taus),
        "manley_rowe": n1 + 2.0 * n2,
        "eta": eta,
        "eta_dot": K * amp * deta,
        "beta": amp * (deta - 1.0),
    }
    return Trajectory(taus, columns, meta)
