"""Exact two-mode Schroedinger dynamics.

Two independent routes:

* sector propagation -- every charge sector ``N = n1 + 2 n2`` is a small
  tridiagonal problem, solved either by eigendecomposition
  (``sector_expm``) or by an adaptive Runge-Kutta integrator
  (``sector_ode``);
* the adaptive frame -- the state is written as
  ``D2(alpha) S1(eta) |phi>`` with ``|phi>`` on a small product basis and
  the frame parameters re-fitted as the state moves.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from . import __version__
from .config import PropagatorSpec, SimConfig
from .errors import BasisTooSmallError, IntegrationError
from .fockspace import (
    SectorState,
    coherent_amplitudes,
    displacement_matrix,
    initial_state,
    moments_to_columns,
    sector_coupling_elements,
    sector_dimension,
    sector_moments,
    squeeze_matrix,
)
from .krylov import expm_krylov
from .observables import Trajectory, quadrature_variances

log = logging.getLogger(__name__)

FRAME_LEAK_MAX = 1e-4


# ---------------------------------------------------------------------------
# sector propagation


def _sector_eig(N: int, K: complex):
    """Eigen-decomposition ``H = U V diag(w) V^T U^dag`` of a sector block.

    The off-diagonal ``(i K / 2) c_k`` carries a constant phase, removed by
    ``U = diag(exp(-i k psi))`` so that ``V`` is real orthogonal.
    """
    d = sector_dimension(N)
    if d == 1:
        return np.zeros(1), np.ones((1, 1)), np.ones(1, dtype=complex)
    w_off = 0.5j * complex(K)
    psi = cmath.phase(w_off)
    off = abs(w_off) * sector_coupling_elements(N)
    w, V = eigh_tridiagonal(np.zeros(d), off)
    u = np.exp(-1j * psi * np.arange(d))
    return w, V, u


def _expm_block(N, psi0, K, t) -> np.ndarray:
    w, V, u = _sector_eig(N, K)
    coef = V.T @ (np.conj(u) * psi0)
    E = np.exp(-1j * np.outer(w, t)) * coef[:, None]
    # contiguous real operands keep the products on BLAS
    re = V @ np.ascontiguousarray(E.real)
    im = V @ np.ascontiguousarray(E.imag)
    return (re + 1j * im) * u[:, None]


def _ode_block(N, psi0, K, t, step_tol) -> np.ndarray:
    d = sector_dimension(N)
    if d == 1:
        return np.repeat(psi0[:, None], len(t), axis=1).astype(complex)
    c = sector_coupling_elements(N)
    up = 0.5j * complex(K) * c
    down = -0.5j * np.conj(complex(K)) * c

    def rhs(_, y):
        out = np.zeros_like(y)
        out[:-1] += up * y[1:]
        out[1:] += down * y[:-1]
        return -1j * out

    scale = max(np.max(np.abs(psi0)), 1e-300)
    sol = solve_ivp(
        rhs,
        (t[0], t[-1]),
        np.asarray(psi0, dtype=complex),
        method="DOP853",
        t_eval=t,
        rtol=step_tol,
        atol=step_tol * scale * 1e-2,
    )
    if not sol.success:
        raise IntegrationError(sol.message, module="exactdyn", time=float(sol.t[-1]), sector=N)
    return sol.y


def _propagate_block(N, psi0, K, t, spec: PropagatorSpec, time_scale: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if spec.method == "sector_ode":
        A = _ode_block(N, psi0, K, t - t[0], spec.step_tol)
        w0 = float(np.vdot(psi0, psi0).real)
        if w0 > 0:
            drift = np.abs(np.sum(np.abs(A) ** 2, axis=0) - w0) / w0
            span = max(1.0, (t[-1] - t[0]) * time_scale)
            # budget: 10 step_tol per unit of scaled time
            if drift.max() > 10.0 * spec.step_tol * span:
                bad = int(np.argmax(drift))
                raise IntegrationError(
                    f"norm drift {drift[bad]:.3g} exceeds 10*step_tol per unit scaled time",
                    module="exactdyn",
                    time=float(t[bad]),
                    sector=N,
                )
        return A
    if spec.method == "sector_expm":
        return _expm_block(N, psi0, K, t - t[0])
    raise ValueError(f"{spec.method!r} is not a sector method")


def propagate_sector(
    state: SectorState, K: complex, t_grid: Sequence[float], spec: Optional[PropagatorSpec] = None
) -> list[SectorState]:
    """Solve ``i d psi/dt = H psi`` in one sector; ``t_grid`` is raw time.

    ``t_grid`` must start at ``state.time``.
    """
    spec = spec or PropagatorSpec()
    t = np.asarray(t_grid, dtype=float)
    if len(t) == 0 or abs(t[0] - state.time) > 1e-12 * max(1.0, abs(state.time)):
        raise ValueError("t_grid must start at state.time")
    A = _propagate_block(state.N, state.amplitudes, K, t, spec, abs(K))
    return [SectorState(state.N, A[:, i], float(ti)) for i, ti in enumerate(t)]


def _config_echo(config: SimConfig) -> dict:
    return {"config": config.to_dict(), "version": __version__}


def evolve_exact(config: SimConfig, spec: Optional[PropagatorSpec] = None) -> Trajectory:
    """Exact evolution by sector propagation on the config's scaled grid.

    Sectors are independent and may be propagated on ``config.threads``
    worker threads; moments are reduced in a fixed sector order so output is
    independent of the thread count.
    """
    spec = spec or config.propagator
    if spec.method == "adaptive_frame":
        spec = PropagatorSpec(method="sector_expm", step_tol=spec.step_tol)
    state = initial_state(config)
    taus = config.scaled_grid()
    t_raw = taus / config.time_scale
    K = complex(config.K)
    order = sorted(state.sectors)
    retained = state.norm2()

    def work(N):
        try:
            return N, _propagate_block(N, state.sectors[N].amplitudes, K, t_raw, spec, config.time_scale)
        except IntegrationError:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise IntegrationError(str(exc), module="exactdyn", sector=N) from exc

    def blocks():
        if config.threads == 1:
            for N in order:
                yield work(N)
            return
        chunk = 4 * config.threads
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            for i in range(0, len(order), chunk):
                yield from pool.map(work, order[i : i + chunk])

    m = sector_moments(blocks(), len(taus))
    columns = moments_to_columns(m)
    mr = columns["manley_rowe"]
    meta = {
        "method": "exact",
        "propagator": spec.method,
        "n2_0": config.n2_0,
        "n_sectors": len(order),
        "max_sector_dim": sector_dimension(order[-1]) if order else 0,
        "retained_weight": retained,
        "manley_rowe_drift": float(np.max(np.abs(mr - mr[0])) / max(abs(mr[0]), 1.0)),
        "norm_drift": float(np.max(np.abs(columns["norm2"] - 1.0))),
        **_config_echo(config),
    }
    return Trajectory(taus, columns, meta)


# ---------------------------------------------------------------------------
# gauge symmetry


@dataclass(frozen=True)
class GaugeReport:
    phase: float
    passed: bool
    max_deviation: dict
    tol: float

    def __bool__(self):
        return self.passed


GAUGE_FIELDS = ("n1", "n2", "norm2", "manley_rowe")


def gauge_check(config: SimConfig, phase: float, tol: float = 1e-8) -> GaugeReport:
    """Compare a run against one with ``a2 -> a2 e^{i phase}``, ``K -> K e^{-i phase}``.

    Phase-insensitive observables (photon numbers, norm, conversion
    efficiency) must agree to ``tol``.
    """
    base = evolve_exact(config)
    rotated = evolve_exact(
        config.replace(
            pump_phase=config.pump_phase + phase,
            K=complex(config.K) * cmath.exp(-1j * phase),
        )
    )
    dev = {}
    for name in GAUGE_FIELDS:
        dev[name] = float(np.max(np.abs(base[name] - rotated[name])))
    if config.n2_0 > 0:
        dev["efficiency"] = dev["n1"] / (2.0 * config.n2_0)
    passed = all(v <= tol for v in dev.values())
    if not passed:
        log.warning("gauge symmetry violated at phase %g: %s", phase, dev)
    return GaugeReport(phase=phase, passed=passed, max_deviation=dev, tol=tol)


# ---------------------------------------------------------------------------
# adaptive displaced / squeezed frame


class _Frame:
    """Operators of one frame ``D2(alpha) S1(eta)`` on an ``ns x np`` basis.

    The transformed Hamiltonian uses the exact Bogoliubov images
    ``D^dag a2 D = a2 + alpha`` and
    ``S^dag a1 S = cosh(r) a1 + e^{i theta} sinh(r) a1^dag``
    (``eta = r e^{i theta}``), squared analytically so that ``H'`` is
    exactly Hermitian on the truncated basis.
    """

    def __init__(self, alpha: complex, eta: complex, ns: int, npump: int, K: complex):
        self.alpha = complex(alpha)
        self.eta = complex(eta)
        self.K = complex(K)
        r = abs(self.eta)
        eith = cmath.exp(1j * cmath.phase(self.eta)) if r > 0 else 1.0
        self.c, self.s, self.eith = math.cosh(r), math.sinh(r), eith
        n = np.arange(ns, dtype=float)
        lo2 = np.sqrt(n[2:] * (n[2:] - 1.0))
        # B^2 = c^2 a^2 + c s e^{i th} (2n+1) + s^2 e^{2 i th} a^dag^2
        B2 = sp.diags(
            [self.c**2 * lo2, self.c * self.s * eith * (2 * n + 1), self.s**2 * eith**2 * lo2],
            [2, 0, -2],
            shape=(ns, ns),
            format="csr",
            dtype=complex,
        )
        self.B2 = B2
        self.Bd2 = B2.conj().T.tocsr()
        self.sq_p = np.sqrt(np.arange(1, npump, dtype=float))

    def _pump_lower_T(self, X):
        # X @ (a + alpha)^T : column m picks up sqrt(m+1) X[:, m+1]
        out = self.alpha * X
        out[:, :-1] += X[:, 1:] * self.sq_p
        return out

    def _pump_raise_T(self, X):
        # X @ (a^dag + alpha*)^T : column m picks up sqrt(m) X[:, m-1]
        out = np.conj(self.alpha) * X
        out[:, 1:] += X[:, :-1] * self.sq_p
        return out

    def apply(self, X):
        """``H' X`` for ``X`` of shape ``(ns, np)``."""
        t1 = self.Bd2 @ self._pump_lower_T(X)
        t2 = self.B2 @ self._pump_raise_T(X)
        return 0.5j * (self.K * t1 - np.conj(self.K) * t2)

    def lab_moments(self, phi):
        """Lab-frame moments of ``D2 S1 |phi>``."""
        w_s = np.sum(np.abs(phi) ** 2, axis=1)
        w_p = np.sum(np.abs(phi) ** 2, axis=0)
        norm2 = float(w_s.sum())
        ns, npump = phi.shape
        n_s = np.arange(ns, dtype=float)
        n_p = np.arange(npump, dtype=float)
        b = np.sum(np.conj(phi[:-1]) * np.sqrt(n_s[1:])[:, None] * phi[1:])
        b2 = np.sum(np.conj(phi[:-2]) * np.sqrt(n_s[2:] * (n_s[2:] - 1))[:, None] * phi[2:])
        nb = float(n_s @ w_s)
        p = np.sum(np.conj(phi[:, :-1]) * np.sqrt(n_p[1:]) * phi[:, 1:])
        p2 = np.sum(np.conj(phi[:, :-2]) * np.sqrt(n_p[2:] * (n_p[2:] - 1)) * phi[:, 2:])
        npm = float(n_p @ w_p)
        c, s, e = self.c, self.s, self.eith
        a1 = c * b + s * e * np.conj(b)
        a1sq = c * c * b2 + c * s * e * (2 * nb + norm2) + s * s * e * e * np.conj(b2)
        n1 = c * c * nb + 2 * c * s * (np.conj(e) * b2).real + s * s * (nb + norm2)
        al = self.alpha
        a2 = p + al * norm2
        a2sq = p2 + 2 * al * p + al * al * norm2
        n2 = npm + 2 * (np.conj(al) * p).real + abs(al) ** 2 * norm2
        return {
            "norm2": norm2,
            "n1": float(n1),
            "n2": float(n2),
            "a1": complex(a1),
            "a2": complex(a2),
            "a1sq": complex(a1sq),
            "a2sq": complex(a2sq),
        }


def _leakage(phi):
    ns, npump = phi.shape
    top_s = ns - max(1, ns // 10)
    top_p = npump - max(1, npump // 10)
    w = np.abs(phi) ** 2
    return float(w[top_s:].sum()), float(w[:, top_p:].sum())


def _moment_squeeze(m) -> complex:
    """Squeeze parameter that removes ``<b^2>`` of the sub-harmonic fluctuations."""
    norm2 = m["norm2"]
    a1 = m["a1"] / norm2
    cov = m["a1sq"] / norm2 - a1 * a1
    n = m["n1"] / norm2 - abs(a1) ** 2
    x = 2 * abs(cov) / (2 * n + 1)
    if x <= 0:
        return 0j
    r = 0.5 * math.atanh(min(x, 1 - 1e-15))
    return r * cmath.exp(1j * cmath.phase(cov))


def _rebase(phi, frame: _Frame, alpha_new: complex, eta_new: complex):
    """Re-express ``phi`` in the frame ``(alpha_new, eta_new)``."""
    ns, npump = phi.shape
    d_alpha = frame.alpha - alpha_new
    if d_alpha != 0:
        # D(-a') D(a) = exp(i Im(conj(a') a)) D(a - a')
        phase = cmath.exp(1j * (np.conj(alpha_new) * frame.alpha).imag)
        phi = phase * (phi @ displacement_matrix(d_alpha, npump).T)
    eta_old = frame.eta
    if eta_new != eta_old:
        cross = (np.conj(eta_old) * eta_new).imag
        if abs(cross) <= 1e-12 * max(abs(eta_old) * abs(eta_new), 1e-300):
            # collinear squeezes compose additively
            Sm = squeeze_matrix(eta_old - eta_new, ns)
        else:
            big = ns + 4 * int(math.ceil(math.sinh(max(abs(eta_old), abs(eta_new))) ** 2)) + 40
            Sm = (squeeze_matrix(-eta_new, big) @ squeeze_matrix(eta_old, big))[:ns, :ns]
        phi = Sm @ phi
    return phi


def evolve_adaptive_frame(config: SimConfig, spec: Optional[PropagatorSpec] = None) -> Trajectory:
    """Evolve ``D2(alpha) S1(eta) |phi>`` with dynamically adapted frame parameters.

    During a step of scaled length ``spec.dt`` the frame is frozen and
    ``|phi>`` evolves under the transformed Hamiltonian (Lanczos propagator).
    After the step the target frame is ``alpha = <a2>`` and, for
    ``frame_rule="moments"``, the squeeze that cancels the sub-harmonic
    ``<delta a1^2>``; ``frame_rule="meanfield"`` instead advances
    ``eta`` by ``K <a2> dt``. When a target drifts from the current frame by
    more than ``spec.rebase_threshold`` the coefficients are re-expanded
    with displacement/squeeze matrices.

    Population in the top tenth of either basis is reported at each output
    time; above 1e-4 a :class:`BasisTooSmallError` names the mode.
    """
    spec = spec or config.propagator
    ns, npump = config.frame_sub, config.frame_pump
    K = complex(config.K)
    alpha1 = complex(config.seed_alpha1)
    phi = np.zeros((ns, npump), dtype=complex)
    c1 = coherent_amplitudes(alpha1, ns - 1) if alpha1 != 0 else np.eye(1, ns, dtype=complex)[0]
    phi[:, 0] = c1
    frame = _Frame(config.pump_amplitude, 0j, ns, npump, K)
    taus = config.scaled_grid()
    scale = config.time_scale

    rec = {k: [] for k in ("norm2", "n1", "n2", "a1", "a2", "a1sq", "a2sq")}
    frame_alpha, frame_eta, leak_p, leak_s, matvecs = [], [], [], [], []
    n_rebase = 0
    total_mv = 0

    def record(tau):
        m = frame.lab_moments(phi)
        for k in rec:
            rec[k].append(m[k])
        ls, lp = _leakage(phi)
        leak_s.append(ls)
        leak_p.append(lp)
        frame_alpha.append(frame.alpha)
        frame_eta.append(frame.eta)
        matvecs.append(total_mv)
        for mode, leak in (("sub-harmonic", ls), ("pump", lp)):
            if leak > FRAME_LEAK_MAX:
                raise BasisTooSmallError(
                    f"{mode} frame basis too small: top-decile population {leak:.3g} > {FRAME_LEAK_MAX:g} "
                    f"(frame_sub={ns}, frame_pump={npump})",
                    mode=mode,
                    leakage=leak,
                    time=float(tau),
                )
        return m

    m = record(taus[0])
    eta_track = frame.eta
    for i in range(1, len(taus)):
        span = taus[i] - taus[i - 1]
        nsub = max(1, int(math.ceil(span / spec.dt - 1e-9)))
        h = span / nsub
        for _ in range(nsub):
            phi, nmv = expm_krylov(
                lambda v: frame.apply(v.reshape(ns, npump)).ravel(), phi, h / scale, tol=spec.step_tol
            )
            total_mv += nmv
            m = frame.lab_moments(phi)
            alpha_t = m["a2"] / m["norm2"]
            if spec.frame_rule == "meanfield":
                eta_track += K * alpha_t * (h / scale)
                eta_t = eta_track
            else:
                eta_t = _moment_squeeze(m)
            if (
                abs(alpha_t - frame.alpha) > spec.rebase_threshold
                or abs(eta_t - frame.eta) > spec.rebase_threshold
            ):
                phi = _rebase(phi, frame, alpha_t, eta_t)
                frame = _Frame(alpha_t, eta_t, ns, npump, K)
                n_rebase += 1
        try:
            record(taus[i])
        except BasisTooSmallError as exc:
            exc.partial = _adaptive_traj(taus[: i + 1], rec, frame_alpha, frame_eta, leak_s, leak_p, matvecs, config, n_rebase)
            raise
    return _adaptive_traj(taus, rec, frame_alpha, frame_eta, leak_s, leak_p, matvecs, config, n_rebase)


def _adaptive_traj(taus, rec, frame_alpha, frame_eta, leak_s, leak_p, matvecs, config, n_rebase):
    n = len(taus)
    m = {k: np.asarray(v[:n]) for k, v in rec.items()}
    cols = {
        "n1": m["n1"].astype(float),
        "n2": m["n2"].astype(float),
        "a1": m["a1"].astype(complex),
        "a2": m["a2"].astype(complex),
        "a1sq": m["a1sq"].astype(complex),
        "norm2": m["norm2"].astype(float),
    }
    cols["var_x1"], cols["var_p1"] = quadrature_variances(cols["n1"], cols["a1"], cols["a1sq"])
    cols["var_x2"], cols["var_p2"] = quadrature_variances(cols["n2"], cols["a2"], m["a2sq"])
    cols["manley_rowe"] = cols["n1"] + 2 * cols["n2"]
    cols["frame_alpha"] = np.asarray(frame_alpha[:n], dtype=complex)
    cols["frame_eta"] = np.asarray(frame_eta[:n], dtype=complex)
    cols["leak_sub"] = np.asarray(leak_s[:n], dtype=float)
    cols["leak_pump"] = np.asarray(leak_p[:n], dtype=float)
    cols["matvecs"] = np.asarray(matvecs[:n], dtype=float)
    meta = {
        "method": "adaptive",
        "propagator": "adaptive_frame",
        "n2_0": config.n2_0,
        "frame_sub": config.frame_sub,
        "frame_pump": config.frame_pump,
        "frame_rule": config.propagator.frame_rule,
        "n_rebase": n_rebase,
        **_config_echo(config),
    }
    return Trajectory(np.asarray(taus, dtype=float), cols, meta)
