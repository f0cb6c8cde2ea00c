"""Feature extraction: conversion efficiency, optimum times, squeezing floors."""

from __future__ import annotations

import cmath
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .config import SimConfig
from .errors import AnalysisError, DownconversionError
from .observables import Trajectory

log = logging.getLogger(__name__)

EFFICIENCY_SLACK = 1e-6


def run_model(config: SimConfig) -> Trajectory:
    """Dispatch ``config.method`` to the matching model layer."""
    from . import baselines, exactdyn, meanfield

    if config.method == "exact":
        return exactdyn.evolve_exact(config)
    if config.method == "adaptive":
        return exactdyn.evolve_adaptive_frame(config)
    if config.method == "meanfield":
        traj = meanfield.integrate_meanfield(
            config.n2_0, abs(config.K), t_grid=config.scaled_grid(), tol=config.propagator.step_tol
        )
        traj.columns = baselines.rotate_gauge(traj.columns, config.K, config.pump_phase)
        return traj
    if config.method == "linearized":
        return baselines.linearized_trajectory(config)
    if config.method == "classical":
        return baselines.classical_trajectory(config)
    raise AnalysisError(f"unknown method {config.method!r}")


def conversion_efficiency(traj: Trajectory, n2_0: float, strict: bool = True) -> np.ndarray:
    """Fraction of pump photons converted into pairs, ``<n1> / (2 n2_0)``.

    Values up to ``1 + 1e-6`` are clipped to one; anything larger raises
    :class:`AnalysisError` unless ``strict`` is false, in which case the
    raw ratio is returned.
    """
    if not n2_0 > 0:
        raise AnalysisError("conversion efficiency needs n2_0 > 0")
    meta_n2 = traj.meta.get("n2_0")
    if meta_n2 is not None and not math.isclose(meta_n2, n2_0, rel_tol=1e-12, abs_tol=0.0):
        raise AnalysisError(f"trajectory was run with n2_0={meta_n2}, not {n2_0}")
    eff = np.asarray(traj["n1"], dtype=float) / (2.0 * n2_0)
    if not strict:
        return eff
    worst = float(eff.max(initial=0.0))
    if worst > 1.0 + EFFICIENCY_SLACK:
        raise AnalysisError(f"efficiency {worst:.6g} exceeds unity ({traj.method} trajectory)")
    return np.minimum(eff, 1.0)


@dataclass(frozen=True)
class Extremum:
    time: float
    value: float
    index: int
    at_boundary: bool = False
    warning: Optional[str] = None


_DERIVED: dict[str, Callable[[Trajectory], np.ndarray]] = {
    "abs_a2": lambda tr: np.abs(tr["a2"]),
    "re_a2": lambda tr: tr["a2"].real,
    "abs_a1sq": lambda tr: np.abs(tr["a1sq"]),
}


def _series(traj: Trajectory, field_: Union[str, Callable]) -> np.ndarray:
    if callable(field_):
        return np.asarray(field_(traj), dtype=float)
    if field_ in _DERIVED:
        return _DERIVED[field_](traj)
    col = traj[field_]
    if np.iscomplexobj(col):
        raise AnalysisError(f"column {field_!r} is complex; pick a real selector such as 'abs_a2'")
    return np.asarray(col, dtype=float)


def parabolic_vertex(t, y):
    """Vertex of the parabola through three points."""
    (t0, t1, t2), (y0, y1, y2) = t, y
    d0, d2 = t0 - t1, t2 - t1
    denom = d0 * d2 * (d0 - d2)
    if denom == 0:
        return t1, y1
    a = ((y0 - y1) * d2 - (y2 - y1) * d0) / denom
    b = ((y2 - y1) * d0**2 - (y0 - y1) * d2**2) / denom
    if a == 0:
        return t1, y1
    s = -b / (2 * a)
    if not min(d0, d2) <= s <= max(d0, d2):
        return t1, y1
    return t1 + s, y1 + b * s / 2


def find_extremum_time(traj: Trajectory, field_: Union[str, Callable], kind: str = "max") -> Extremum:
    """Global extremum of a series, refined by a parabola through its neighbours.

    An extremum on the first or last grid point is returned unrefined with a
    boundary warning.
    """
    if kind not in ("min", "max"):
        raise ValueError("kind must be 'min' or 'max'")
    if len(traj) < 5:
        raise AnalysisError("need at least 5 points to locate an extremum")
    y = _series(traj, field_)
    t = traj.times
    i = int(np.argmax(y) if kind == "max" else np.argmin(y))
    if i == 0 or i == len(y) - 1:
        name = field_ if isinstance(field_, str) else getattr(field_, "__name__", "field")
        msg = f"{kind} of {name} lies on the grid boundary (t={t[i]:.6g})"
        return Extremum(float(t[i]), float(y[i]), i, True, msg)
    tv, yv = parabolic_vertex(t[i - 1 : i + 2], y[i - 1 : i + 2])
    return Extremum(float(tv), float(yv), i)


def pump_amplitude_minimum(traj: Trajectory) -> Extremum:
    """Where the coherent pump amplitude first vanishes.

    The in-phase component (projection of ``<a2>`` on its initial phase) is
    followed to its first sign change and the root is located on a local
    cubic. Without a sign change this falls back to the refined minimum of
    ``|<a2>|``.
    """
    a2 = np.asarray(traj["a2"], dtype=complex)
    rot = cmath.exp(-1j * cmath.phase(a2[0])) if a2[0] != 0 else 1.0
    x = (a2 * rot).real
    t = traj.times
    sign_change = np.nonzero((x[:-1] > 0) & (x[1:] <= 0))[0]
    if len(sign_change) and abs(a2[0]) > 0:
        j = int(sign_change[0]) + 1
        lo, hi = max(0, j - 2), min(len(t), j + 2)
        if hi - lo >= 4:
            coeffs = np.polyfit(t[lo:hi] - t[j - 1], x[lo:hi], 3)
            root = brentq(lambda s: np.polyval(coeffs, s), 0.0, t[j] - t[j - 1])
            tr = t[j - 1] + root
        else:
            tr = t[j - 1] + (t[j] - t[j - 1]) * x[j - 1] / (x[j - 1] - x[j])
        return Extremum(float(tr), 0.0, j)
    return find_extremum_time(traj, "abs_a2", "min")


@dataclass
class TrajectoryFeatures:
    """Headline numbers of one trajectory (times are scaled)."""

    method: str
    n2_0: float
    max_conversion_efficiency: float
    t_of_max_conversion: float
    min_var_p1: float
    t_of_min_var_p1: float
    max_var_x2: float
    var_x2_at_max_conversion: float
    pump_amplitude_min: float
    t_of_pump_amplitude_min: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def extract_features(traj: Trajectory, n2_0: Optional[float] = None) -> TrajectoryFeatures:
    n2_0 = traj.meta.get("n2_0", 0.0) if n2_0 is None else n2_0
    warnings = []
    if n2_0 > 0:
        try:
            eff = conversion_efficiency(traj, n2_0)
        except AnalysisError as exc:
            warnings.append(str(exc))
            eff = np.minimum(conversion_efficiency(traj, n2_0, strict=False), 1.0)
    else:
        eff = np.zeros(len(traj))
    tmp = Trajectory(traj.times, {"eff": eff}, {})
    e_max = find_extremum_time(tmp, "eff", "max")
    if n2_0 == 0 or np.ptp(eff) == 0:
        e_max = Extremum(float(traj.times[0]), float(eff[0]), 0)
    elif e_max.warning:
        warnings.append(e_max.warning)
    p_min = find_extremum_time(traj, "var_p1", "min")
    if p_min.warning and np.ptp(traj["var_p1"]) > 0:
        warnings.append(p_min.warning)
    x2 = np.asarray(traj["var_x2"])
    i_eff = e_max.index
    amp = pump_amplitude_minimum(traj) if n2_0 > 0 else Extremum(float(traj.times[0]), 0.0, 0)
    return TrajectoryFeatures(
        method=traj.method,
        n2_0=float(n2_0),
        max_conversion_efficiency=float(min(max(e_max.value, 0.0), 1.0)),
        t_of_max_conversion=e_max.time,
        min_var_p1=p_min.value,
        t_of_min_var_p1=p_min.time,
        max_var_x2=float(x2.max()),
        var_x2_at_max_conversion=float(np.interp(e_max.time, traj.times, x2)) if i_eff else float(x2[0]),
        pump_amplitude_min=amp.value,
        t_of_pump_amplitude_min=amp.time,
        warnings=warnings,
    )


@dataclass(frozen=True)
class SweepRow:
    n2_0: float
    efficiency: float
    t_of_max: float
    runtime_s: float
    error: Optional[str] = None


def efficiency_sweep(n2_list: Sequence[float], template: SimConfig, threads: int = 1) -> list[SweepRow]:
    """Maximum conversion efficiency for each pump photon number.

    Each member uses ``template`` with ``n2_0`` replaced; ``t_max_scaled`` is
    reset to its per-member default when the template leaves it unset.
    Failures are recorded in the row and the sweep carries on.
    """

    def one(n2):
        t0 = time.perf_counter()
        try:
            cfg = template.replace(n2_0=float(n2))
            feats = extract_features(run_model(cfg), float(n2))
            return SweepRow(float(n2), feats.max_conversion_efficiency, feats.t_of_max_conversion, time.perf_counter() - t0)
        except (DownconversionError, ValueError) as exc:
            log.warning("sweep member n2_0=%g failed: %s", n2, exc)
            return SweepRow(float(n2), math.nan, math.nan, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")

    if threads <= 1 or len(n2_list) <= 1:
        return [one(n) for n in n2_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, n2_list))
