"""Short-iterative Lanczos propagator for ``exp(-i H t) v`` with Hermitian ``H``.

Only a matrix-vector product is needed. Each sub-step builds an
``m``-dimensional Krylov space, exponentiates the small tridiagonal
projection exactly, and shrinks the sub-step until the standard
a-posteriori error estimate ``beta_0 beta_m |e_m^T exp(-i T_m h) e_1|`` is
below tolerance.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal


def expm_krylov(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    t: float,
    tol: float = 1e-10,
    m: int = 30,
    max_substeps: int = 100000,
) -> tuple[np.ndarray, int]:
    """Return ``(exp(-i H t) v, n_matvecs)``.

    ``tol`` bounds the estimated error of each sub-step relative to the
    norm of ``v``.
    """
    w = np.array(v, dtype=complex)
    shape = w.shape
    w = w.ravel()
    beta0 = np.linalg.norm(w)
    if beta0 == 0.0 or t == 0.0:
        return w.reshape(shape), 0
    done = 0.0
    h = t
    nmv = 0
    for _ in range(max_substeps):
        if done >= t:
            break
        beta0 = np.linalg.norm(w)
        V = np.empty((m + 1, w.size), dtype=complex)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        V[0] = w / beta0
        k_used = m
        for j in range(m):
            u = matvec(V[j])
            nmv += 1
            alpha[j] = np.vdot(V[j], u).real
            u = u - alpha[j] * V[j]
            if j > 0:
                u = u - beta[j - 1] * V[j - 1]
            # full reorthogonalisation keeps the basis usable for m ~ 30
            Vj = V[: j + 1]
            u = u - (Vj @ u.conj()).conj() @ Vj
            beta[j] = np.linalg.norm(u)
            if beta[j] <= 1e-13 * max(1.0, abs(alpha[j])):
                k_used = j + 1
                break
            V[j + 1] = u / beta[j]
        lam, Q = eigh_tridiagonal(alpha[:k_used], beta[: k_used - 1])
        exact = k_used < m
        remaining = t - done
        h = min(h * 2.0, remaining) if done > 0 else min(h, remaining)
        while True:
            c = Q @ (np.exp(-1j * lam * h) * Q[0])
            err = 0.0 if exact else beta[k_used - 1] * abs(c[-1])
            if err <= tol:
                break
            h *= 0.5
        w = beta0 * (c @ V[:k_used])
        done += h
    else:
        raise RuntimeError("Krylov propagator exceeded max_substeps")
    return w.reshape(shape), nmv
