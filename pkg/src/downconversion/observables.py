"""Per-time observable records and the columnar trajectory container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

# Fixed output column order (CSV format version 1).
CSV_COLUMNS = (
    "t_scaled",
    "n1_mean",
    "n2_mean",
    "re_a2",
    "im_a2",
    "re_a1sq",
    "im_a1sq",
    "var_x1",
    "var_p1",
    "var_x2",
    "var_p2",
    "norm2",
    "manley_rowe",
    "eta",
    "beta",
)
CSV_FORMAT_VERSION = 1

REAL_FIELDS = ("n1", "n2", "var_x1", "var_p1", "var_x2", "var_p2", "norm2", "manley_rowe")
COMPLEX_FIELDS = ("a1", "a2", "a1sq")


@dataclass(frozen=True)
class Observables:
    """Moments of the two-mode state at one instant.

    Quadratures follow ``a = x + i p`` so vacuum variances are 1/4.
    ``manley_rowe`` is the expectation of ``n1 + 2 n2``.
    """

    n1: float
    n2: float
    a1: complex
    a2: complex
    a1sq: complex
    var_x1: float
    var_p1: float
    var_x2: float
    var_p2: float
    norm2: float
    manley_rowe: float


def quadrature_variances(n, a, asq):
    """Var(x), Var(p) from <a^dag a>, <a>, <a^2> (works elementwise)."""
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=complex)
    asq = np.asarray(asq, dtype=complex)
    var_x = 0.25 * (2.0 * asq.real + 2.0 * n + 1.0) - a.real**2
    var_p = 0.25 * (-2.0 * asq.real + 2.0 * n + 1.0) - a.imag**2
    return var_x, var_p


@dataclass
class Trajectory:
    """Time series of observables, stored column-wise.

    ``times`` are scaled times ``tau = |K| |<a2(0)>| t``. ``columns`` maps each
    field of :class:`Observables` to an array; mean-field runs also carry
    ``eta`` and ``beta`` and adaptive-frame runs carry frame diagnostics.
    """

    times: np.ndarray
    columns: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, col in self.columns.items():
            if len(col) != len(self.times):
                raise ValueError(f"column {name!r} has {len(col)} entries, expected {len(self.times)}")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name):
        return name in self.columns

    @property
    def method(self) -> str:
        return self.meta.get("method", "unknown")

    def point(self, i: int) -> Observables:
        c = self.columns
        kwargs = {k: float(c[k][i]) for k in REAL_FIELDS}
        kwargs.update({k: complex(c[k][i]) for k in COMPLEX_FIELDS})
        return Observables(**kwargs)

    @property
    def points(self) -> list[Observables]:
        return [self.point(i) for i in range(len(self))]

    @classmethod
    def from_points(cls, times, points, meta=None, **extra_columns) -> "Trajectory":
        columns = {}
        for name in REAL_FIELDS:
            columns[name] = np.array([getattr(p, name) for p in points], dtype=float)
        for name in COMPLEX_FIELDS:
            columns[name] = np.array([getattr(p, name) for p in points], dtype=complex)
        columns.update({k: np.asarray(v) for k, v in extra_columns.items()})
        return cls(np.asarray(times, dtype=float), columns, dict(meta or {}))

    def csv_rows(self):
        """Rows matching :data:`CSV_COLUMNS`; missing eta/beta become ``None``."""
        c = self.columns
        eta = c.get("eta")
        beta = c.get("beta")
        for i, t in enumerate(self.times):
            yield (
                t,
                c["n1"][i],
                c["n2"][i],
                c["a2"][i].real,
                c["a2"][i].imag,
                c["a1sq"][i].real,
                c["a1sq"][i].imag,
                c["var_x1"][i],
                c["var_p1"][i],
                c["var_x2"][i],
                c["var_p2"][i],
                c["norm2"][i],
                c["manley_rowe"][i],
                None if eta is None else eta[i],
                None if beta is None else beta[i],
            )
