"""Quick invariant checks on small instances (used by ``downconversion selftest``)."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from .config import PropagatorSpec, SimConfig
from .exactdyn import evolve_exact, gauge_check, propagate_sector
from .fockspace import (
    SectorState,
    apply_hamiltonian,
    displacement_matrix,
    sector_dimension,
    sector_hamiltonian,
    squeeze_matrix,
)
from .meanfield import integrate_meanfield, t_conv, t_squeeze


def _sector_dims():
    ok = all(
        sector_dimension(N) == sum(1 for n2 in range(N + 1) if N - 2 * n2 >= 0) for N in range(200)
    )
    return ok, "N < 200"


def _hermiticity():
    rng = np.random.default_rng(7)
    d = sector_dimension(6)
    phi = SectorState(6, rng.normal(size=d) + 1j * rng.normal(size=d))
    psi = SectorState(6, rng.normal(size=d) + 1j * rng.normal(size=d))
    lhs = np.vdot(phi.amplitudes, apply_hamiltonian(psi, 1.0).amplitudes)
    rhs = np.vdot(apply_hamiltonian(phi, 1.0).amplitudes, psi.amplitudes)
    err = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return err <= 1e-12, f"rel err {err:.2e}"


def _two_level():
    t = np.linspace(0, 3, 31)
    states = propagate_sector(SectorState(2, [0, 1]), 1.0, t)
    p = np.array([abs(s.amplitudes[0]) ** 2 for s in states])
    err = np.max(np.abs(p - np.sin(t / math.sqrt(2)) ** 2))
    return err <= 1e-12, f"max err {err:.2e}"


def _ode_vs_dense():
    rng = np.random.default_rng(3)
    worst = 0.0
    for N in range(9):
        d = sector_dimension(N)
        psi = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi /= np.linalg.norm(psi)
        out = propagate_sector(SectorState(N, psi), 1.0, [0.0, 3.0], PropagatorSpec(method="sector_ode"))
        ref = expm(-3j * sector_hamiltonian(N, 1.0)) @ psi
        worst = max(worst, float(np.max(np.abs(out[-1].amplitudes - ref))))
    return worst <= 1e-8, f"max amp err {worst:.2e}"


def _unitarity():
    worst = 0.0
    for M in (displacement_matrix(1.5, 60), squeeze_matrix(0.1, 60)):
        cols = np.linalg.norm(M[:, :30], axis=0)
        worst = max(worst, float(np.max(np.abs(cols - 1))))
    return worst <= 1e-8, f"max column-norm deviation {worst:.2e}"


def _manley_rowe():
    tr = evolve_exact(SimConfig(n2_0=10.0, n_points=41))
    return tr.meta["manley_rowe_drift"] <= 1e-10, f"drift {tr.meta['manley_rowe_drift']:.2e}"


def _energy():
    tr = integrate_meanfield(50.0, t_max=8 * t_conv(50.0), tol=1e-10)
    return tr.meta["energy_drift"] <= 1e-6, f"drift {tr.meta['energy_drift']:.2e}"


def _times():
    ok = all(t_conv(n) == 2 * t_squeeze(n) for n in (1.0, 20.0, 200.0))
    return ok, "t_conv == 2 t_squeeze"


def _gauge():
    rep = gauge_check(SimConfig(n2_0=5.0, n_points=21), math.pi / 2)
    return rep.passed, f"max dev {max(rep.max_deviation.values()):.2e}"


CHECKS = (
    ("sector dimension", _sector_dims),
    ("hamiltonian hermiticity", _hermiticity),
    ("two-level sector", _two_level),
    ("ode vs dense expm", _ode_vs_dense),
    ("D/S unitarity", _unitarity),
    ("manley-rowe", _manley_rowe),
    ("pendulum energy", _energy),
    ("optimum times", _times),
    ("gauge symmetry", _gauge),
)


def run_selftest():
    results = []
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # report, never crash the runner
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
