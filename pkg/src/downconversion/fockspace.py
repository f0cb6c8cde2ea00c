"""Two-mode Fock space organised by the conserved charge ``N = n1 + 2 n2``.

The interaction ``H = (i/2)(K a1^dag^2 a2 - K* a1^2 a2^dag)`` conserves
``n1 + 2 n2``, so every sector ``N`` evolves independently. Inside sector
``N`` the basis states are labelled by ``k = n2 = 0 .. N//2`` with
``n1 = N - 2k``, and ``H`` is tridiagonal in ``k``.

Mode 1 is the sub-harmonic, mode 2 the pump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.linalg import expm

from .config import SimConfig, TruncationSpec
from .errors import IntegrityError, TruncationError
from .observables import Observables, quadrature_variances


def sector_dimension(N: int) -> int:
    if N < 0:
        raise ValueError("sector index must be non-negative")
    return N // 2 + 1


def sector_labels(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Photon numbers ``(n1, n2)`` of the basis states of sector ``N``."""
    k = np.arange(sector_dimension(N))
    return N - 2 * k, k


def sector_coupling_elements(N: int) -> np.ndarray:
    """``sqrt(k (n1+1) (n1+2))`` for ``k = 1 .. N//2`` with ``n1 = N - 2k``.

    This is the matrix element of ``a1^dag^2 a2`` from basis state ``k``
    to ``k - 1``.
    """
    k = np.arange(1, sector_dimension(N), dtype=float)
    return np.sqrt(k * (N - 2 * k + 1.0) * (N - 2 * k + 2.0))


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Number-basis amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` for n <= cutoff.

    Built by the recurrence ``c[n+1] = c[n] a / sqrt(n+1)`` so no factorial
    is ever formed.
    """
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError(f"coherent amplitude must be finite, got {alpha!r}")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    c = np.empty(cutoff + 1, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(cutoff):
        c[n + 1] = c[n] * alpha / math.sqrt(n + 1)
    return c


@dataclass
class SectorState:
    """Amplitudes of one charge sector; ``amplitudes[k]`` belongs to n2 = k."""

    N: int
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (sector_dimension(self.N),):
            raise IntegrityError(
                f"sector N={self.N} needs {sector_dimension(self.N)} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )
        if not np.all(np.isfinite(self.amplitudes)):
            raise IntegrityError(f"non-finite amplitude in sector N={self.N}")

    @property
    def weight(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass
class TwoModeState:
    """Joint pump/sub-harmonic state as a map ``N -> SectorState``."""

    sectors: dict[int, SectorState]
    truncation: TruncationSpec = field(default_factory=TruncationSpec)

    def norm2(self) -> float:
        return math.fsum(self.sectors[N].weight for N in sorted(self.sectors))

    @property
    def time(self) -> float:
        return next(iter(self.sectors.values())).time if self.sectors else 0.0

    def populated(self, threshold: float = 0.0) -> list[int]:
        return [N for N in sorted(self.sectors) if self.sectors[N].weight > threshold]


def initial_state(config: SimConfig) -> TwoModeState:
    """Coherent pump times coherent (by default vacuum) sub-harmonic.

    Each sector ``N`` receives ``c1[N - 2k] * c2[k]``; with a vacuum
    sub-harmonic only even sectors are populated, each by the single
    basis state ``n1 = 0``.
    """
    trunc = config.truncation
    alpha2 = config.pump_amplitude
    alpha1 = complex(config.seed_alpha1)
    cut2 = trunc.cutoff(alpha2, 0.5 * trunc.leak_tol)
    cut1 = trunc.cutoff(alpha1, 0.5 * trunc.leak_tol) if alpha1 != 0 else 0
    c2 = coherent_amplitudes(alpha2, cut2)
    c1 = coherent_amplitudes(alpha1, cut1)
    kept = math.fsum(np.abs(c2) ** 2) * math.fsum(np.abs(c1) ** 2)
    if kept < 1.0 - trunc.leak_tol:
        raise TruncationError(
            f"retained coherent weight {kept:.17g} below 1 - leak_tol "
            f"(cutoffs n1<={cut1}, n2<={cut2}); raise n2_max or sigma_mult"
        )
    sectors = {}
    if alpha1 == 0:
        for k in range(cut2 + 1):
            N = 2 * k
            amps = np.zeros(sector_dimension(N), dtype=complex)
            amps[k] = c2[k]
            sectors[N] = SectorState(N, amps)
        return TwoModeState(sectors, trunc)
    for N in range(cut1 + 2 * cut2 + 1):
        n1, n2 = sector_labels(N)
        ok = (n1 <= cut1) & (n2 <= cut2)
        amps = np.zeros(sector_dimension(N), dtype=complex)
        amps[ok] = c1[n1[ok]] * c2[n2[ok]]
        sectors[N] = SectorState(N, amps)
    return TwoModeState(sectors, trunc)


def apply_hamiltonian(state: SectorState, K: complex) -> SectorState:
    """``H |psi>`` inside one sector (hbar = 1)."""
    psi = state.amplitudes
    out = np.zeros_like(psi)
    if len(psi) > 1:
        c = sector_coupling_elements(state.N)
        out[:-1] += 0.5j * K * c * psi[1:]
        out[1:] += -0.5j * np.conj(K) * c * psi[:-1]
    return SectorState(state.N, out, state.time)


def sector_hamiltonian(N: int, K: complex) -> np.ndarray:
    """Dense Hermitian sector block (for small-N checks)."""
    d = sector_dimension(N)
    H = np.zeros((d, d), dtype=complex)
    if d > 1:
        c = sector_coupling_elements(N)
        idx = np.arange(d - 1)
        H[idx, idx + 1] = 0.5j * K * c
        H[idx + 1, idx] = -0.5j * np.conj(K) * c
    return H


def lowering(dim: int) -> np.ndarray:
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def _padded(dim: int) -> int:
    return dim + max(20, dim // 4)


def displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    """Truncated ``D(alpha) = exp(alpha a^dag - alpha* a)`` in the number basis.

    The generator is exponentiated at a padded dimension and cropped, so
    only the top rows and columns feel the truncation.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(dim, dtype=complex)
    a = lowering(_padded(dim))
    return expm(alpha * a.T - np.conj(alpha) * a)[:dim, :dim]


def squeeze_matrix(eta: complex, dim: int) -> np.ndarray:
    """Truncated ``S(eta) = exp(eta/2 a^dag^2 - eta*/2 a^2)`` in the number basis.

    Even and odd number states never mix, so the two parity blocks are
    exponentiated separately and the odd-parity entries are exact zeros.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    eta = complex(eta)
    out = np.zeros((dim, dim), dtype=complex)
    if eta == 0:
        np.fill_diagonal(out, 1.0)
        return out
    P = _padded(dim)
    a = lowering(P)
    gen = 0.5 * eta * (a.T @ a.T) - 0.5 * np.conj(eta) * (a @ a)
    for parity in (0, 1):
        idx = np.arange(parity, P, 2)
        block = expm(gen[np.ix_(idx, idx)])
        keep = idx < dim
        sel = idx[keep]
        out[np.ix_(sel, sel)] = block[np.ix_(keep, keep)]
    return out


class _Neumaier:
    """Compensated running sum, elementwise over an array shape."""

    def __init__(self, shape, dtype=complex):
        self.s = np.zeros(shape, dtype=dtype)
        self.c = np.zeros(shape, dtype=dtype)

    def add(self, x):
        if np.iscomplexobj(self.s):
            self._add_real(x.real, self.s.real, self.c.real)
            self._add_real(x.imag, self.s.imag, self.c.imag)
        else:
            self._add_real(x, self.s, self.c)

    @staticmethod
    def _add_real(x, s, c):
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s[...] = t

    @property
    def value(self):
        return self.s + self.c


def sector_moments(blocks: Iterable[tuple[int, np.ndarray]], n_times: int) -> dict[str, np.ndarray]:
    """Raw moments from sector amplitude blocks, streamed in increasing ``N``.

    Each block is ``(N, A)`` with ``A`` of shape ``(dim(N), n_times)``.
    Cross-sector terms need sectors ``N-1, N-2, N-4``; absent sectors count
    as zero. Sums are compensated and run in a fixed order, so the result
    does not depend on how the blocks were produced.
    """
    acc = {
        name: _Neumaier(n_times, dtype)
        for name, dtype in (
            ("norm2", float),
            ("n1", float),
            ("n2", float),
            ("a1", complex),
            ("a2", complex),
            ("a1sq", complex),
            ("a2sq", complex),
        )
    }
    window: dict[int, np.ndarray] = {}
    last_N = -1
    for N, A in blocks:
        if N <= last_N:
            raise ValueError("sector blocks must arrive in increasing N")
        last_N = N
        A = np.asarray(A)
        n1, n2 = sector_labels(N)
        p = (A.real**2 + A.imag**2)
        acc["norm2"].add(p.sum(axis=0))
        acc["n1"].add(n1 @ p)
        acc["n2"].add(n2 @ p)
        d = A.shape[0]
        prev1 = window.get(N - 1)
        if prev1 is not None:
            m = prev1.shape[0]
            w = np.sqrt(n1[:m].astype(float))[:, None]
            acc["a1"].add(np.sum(np.conj(prev1) * w * A[:m], axis=0))
        prev2 = window.get(N - 2)
        if prev2 is not None and d > 1:
            w = np.sqrt(n2[1:].astype(float))[:, None]
            acc["a2"].add(np.sum(np.conj(prev2) * w * A[1:], axis=0))
            n1m = n1[: d - 1].astype(float)
            w = np.sqrt(n1m * (n1m - 1.0))[:, None]
            acc["a1sq"].add(np.sum(np.conj(prev2) * w * A[: d - 1], axis=0))
        prev4 = window.get(N - 4)
        if prev4 is not None and d > 2:
            k = n2[2:].astype(float)
            w = np.sqrt(k * (k - 1.0))[:, None]
            acc["a2sq"].add(np.sum(np.conj(prev4) * w * A[2:], axis=0))
        window[N] = A
        for old in [M for M in window if M < N - 4]:
            del window[old]
    return {name: a.value for name, a in acc.items()}


def moments_to_columns(m: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Convert raw moments into the :class:`Observables` column set."""
    var_x1, var_p1 = quadrature_variances(m["n1"], m["a1"], m["a1sq"])
    var_x2, var_p2 = quadrature_variances(m["n2"], m["a2"], m["a2sq"])
    return {
        "n1": np.asarray(m["n1"], dtype=float),
        "n2": np.asarray(m["n2"], dtype=float),
        "a1": np.asarray(m["a1"], dtype=complex),
        "a2": np.asarray(m["a2"], dtype=complex),
        "a1sq": np.asarray(m["a1sq"], dtype=complex),
        "var_x1": var_x1,
        "var_p1": var_p1,
        "var_x2": var_x2,
        "var_p2": var_p2,
        "norm2": np.asarray(m["norm2"], dtype=float),
        "manley_rowe": np.asarray(m["n1"] + 2.0 * m["n2"], dtype=float),
    }


def iter_blocks(state: TwoModeState) -> Iterator[tuple[int, np.ndarray]]:
    for N in sorted(state.sectors):
        yield N, state.sectors[N].amplitudes[:, None]


def observables(state: TwoModeState, tol_norm: float = 1e-6) -> Observables:
    """Moments of ``state``; raises :class:`IntegrityError` if not normalized."""
    m = sector_moments(iter_blocks(state), 1)
    norm2 = float(m["norm2"][0])
    if abs(norm2 - 1.0) > tol_norm:
        raise IntegrityError(f"state norm^2 = {norm2:.12g} outside 1 +- {tol_norm:g}")
    cols = moments_to_columns(m)
    return Observables(
        n1=float(cols["n1"][0]),
        n2=float(cols["n2"][0]),
        a1=complex(cols["a1"][0]),
        a2=complex(cols["a2"][0]),
        a1sq=complex(cols["a1sq"][0]),
        var_x1=float(cols["var_x1"][0]),
        var_p1=float(cols["var_p1"][0]),
        var_x2=float(cols["var_x2"][0]),
        var_p2=float(cols["var_p2"][0]),
        norm2=norm2,
        manley_rowe=float(cols["manley_rowe"][0]),
    )


