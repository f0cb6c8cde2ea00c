"""Simulation configuration: dataclasses, validation and (de)serialization.

Configuration documents are flat mappings with two nested blocks,
``truncation`` and ``propagator``. Files may be YAML or JSON (JSON is
valid YAML). Complex numbers are written as ``[re, im]`` pairs; a bare
number or a Python complex literal string is accepted on input.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml
from scipy.special import pdtrc

from .errors import ConfigError

METHODS = ("classical", "linearized", "meanfield", "exact", "adaptive")
PROPAGATOR_METHODS = ("sector_ode", "sector_expm", "adaptive_frame")
FRAME_RULES = ("moments", "meanfield")


@dataclass(frozen=True)
class TruncationSpec:
    """Fock-space truncation of the initial coherent state.

    ``n2_max`` of ``None`` selects ``ceil(|a|^2 + sigma_mult*|a|)`` for a
    coherent amplitude ``a``.
    """

    n2_max: Optional[int] = None
    sigma_mult: float = 8.0
    leak_tol: float = 1e-10

    def validate(self):
        if self.n2_max is not None and self.n2_max < 0:
            raise ConfigError("must be >= 0", key="truncation.n2_max")
        if not self.sigma_mult > 0:
            raise ConfigError("must be > 0", key="truncation.sigma_mult")
        if not 0 < self.leak_tol < 1:
            raise ConfigError("must lie in (0, 1)", key="truncation.leak_tol")

    def cutoff(self, amplitude: complex, leak: Optional[float] = None) -> int:
        """Highest retained photon number for a coherent amplitude.

        In automatic mode the ``sigma_mult`` estimate is extended until the
        Poisson tail beyond the cutoff is at most ``leak`` (default
        ``leak_tol``); small amplitudes have heavier-than-Gaussian tails.
        """
        if self.n2_max is not None:
            return int(self.n2_max)
        r = abs(amplitude)
        cut = int(math.ceil(r * r + self.sigma_mult * r))
        if r == 0:
            return cut
        leak = self.leak_tol if leak is None else leak
        while pdtrc(cut, r * r) > leak:
            cut += max(1, cut // 20)
        return cut


@dataclass(frozen=True)
class PropagatorSpec:
    """Time-stepping controls.

    ``dt`` is a step in scaled time and is used by the adaptive-frame
    integrator only; the sector methods evaluate the output grid directly.
    """

    method: str = "sector_expm"
    dt: float = 0.01
    step_tol: float = 1e-10
    rebase_threshold: float = 0.02
    frame_rule: str = "moments"

    def validate(self):
        if self.method not in PROPAGATOR_METHODS:
            raise ConfigError(
                f"unknown propagator {self.method!r}; expected one of {PROPAGATOR_METHODS}",
                key="propagator.method",
            )
        if not self.dt > 0:
            raise ConfigError("must be > 0", key="propagator.dt")
        if not self.step_tol > 0:
            raise ConfigError("must be > 0", key="propagator.step_tol")
        if not self.rebase_threshold >= 0:
            raise ConfigError("must be >= 0", key="propagator.rebase_threshold")
        if self.frame_rule not in FRAME_RULES:
            raise ConfigError(
                f"unknown frame rule {self.frame_rule!r}; expected one of {FRAME_RULES}",
                key="propagator.frame_rule",
            )


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one run.

    ``K`` may be complex (only the gauge check uses that). ``pump_phase``
    rotates the initial pump amplitude ``sqrt(n2_0)``. ``t_max_scaled`` of
    ``None`` means twice the mean-field conversion time.
    """

    K: complex = 1.0
    n2_0: float = 200.0
    pump_phase: float = 0.0
    seed_alpha1: complex = 0j
    t_max_scaled: Optional[float] = None
    n_points: int = 400
    method: str = "exact"
    frame_pump: int = 32
    frame_sub: int = 32
    threads: int = 1
    truncation: TruncationSpec = field(default_factory=TruncationSpec)
    propagator: PropagatorSpec = field(default_factory=PropagatorSpec)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not _finite(self.K) or self.K == 0:
            raise ConfigError("must be finite and nonzero", key="K")
        if not (math.isfinite(self.n2_0) and self.n2_0 >= 0):
            raise ConfigError("must be finite and >= 0", key="n2_0")
        if not math.isfinite(self.pump_phase):
            raise ConfigError("must be finite", key="pump_phase")
        if not _finite(self.seed_alpha1):
            raise ConfigError("must be finite", key="seed_alpha1")
        if self.t_max_scaled is not None and not (
            math.isfinite(self.t_max_scaled) and self.t_max_scaled > 0
        ):
            raise ConfigError("must be > 0", key="t_max_scaled")
        if self.n_points < 2:
            raise ConfigError("must be >= 2", key="n_points")
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; expected one of {METHODS}", key="method"
            )
        for key in ("frame_pump", "frame_sub"):
            if getattr(self, key) < 4:
                raise ConfigError("must be >= 4", key=key)
        if self.threads < 1:
            raise ConfigError("must be >= 1", key="threads")
        self.truncation.validate()
        self.propagator.validate()

    @property
    def pump_amplitude(self) -> complex:
        """Initial coherent pump amplitude <a2(0)>."""
        return math.sqrt(self.n2_0) * complex(math.cos(self.pump_phase), math.sin(self.pump_phase))

    @property
    def time_scale(self) -> float:
        """Factor converting raw time to scaled time, |K| * |<a2(0)>|.

        With an empty pump the amplitude factor is replaced by one.
        """
        amp = math.sqrt(self.n2_0) if self.n2_0 > 0 else 1.0
        return abs(self.K) * amp

    def resolved_t_max(self) -> float:
        if self.t_max_scaled is not None:
            return float(self.t_max_scaled)
        if self.n2_0 > 0:
            from .meanfield import t_conv

            return 2.0 * t_conv(self.n2_0)
        return 1.0

    def scaled_grid(self):
        import numpy as np

        return np.linspace(0.0, self.resolved_t_max(), self.n_points)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "K": _dump_number(self.K),
            "n2_0": self.n2_0,
            "pump_phase": self.pump_phase,
            "seed_alpha1": _dump_number(self.seed_alpha1),
            "t_max_scaled": self.t_max_scaled,
            "n_points": self.n_points,
            "method": self.method,
            "frame_pump": self.frame_pump,
            "frame_sub": self.frame_sub,
            "threads": self.threads,
            "truncation": dataclasses.asdict(self.truncation),
            "propagator": dataclasses.asdict(self.propagator),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("configuration document must be a mapping")
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError("unknown configuration key", key=key)
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key == "truncation":
                kwargs[key] = _sub_spec(TruncationSpec, value, key)
            elif key == "propagator":
                kwargs[key] = _sub_spec(PropagatorSpec, value, key)
            else:
                kwargs[key] = _coerce(key, value)
        return cls(**kwargs)


def load_config(path) -> SimConfig:
    """Read a YAML/JSON configuration file."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return SimConfig.from_dict(data or {})


_INT_KEYS = {"n_points", "frame_pump", "frame_sub", "threads", "n2_max"}
_COMPLEX_KEYS = {"K", "seed_alpha1"}
_STR_KEYS = {"method", "frame_rule"}


def _coerce(key, value):
    name = key.rsplit(".", 1)[-1]
    try:
        if name in _COMPLEX_KEYS:
            return parse_complex(value)
        if name in _STR_KEYS:
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
        if value is None and name in {"t_max_scaled", "n2_max"}:
            return None
        if name in _INT_KEYS:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError("expected an integer")
            return int(value)
        if isinstance(value, bool):
            raise TypeError("expected a number")
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} ({exc})", key=key) from None


def _sub_spec(cls, value, prefix):
    if value is None:
        return cls()
    if isinstance(value, cls):
        return value
    if not isinstance(value, Mapping):
        raise ConfigError("must be a mapping", key=prefix)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, item in value.items():
        if key not in known:
            raise ConfigError("unknown configuration key", key=f"{prefix}.{key}")
        kwargs[key] = _coerce(f"{prefix}.{key}", item)
    return cls(**kwargs)


def parse_complex(value) -> complex:
    """Accept ``[re, im]``, a real number, a complex, or a complex literal string."""
    if isinstance(value, bool):
        raise TypeError("expected a number")
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("complex pair must have two entries")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _dump_number(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def _finite(z) -> bool:
    z = complex(z)
    return math.isfinite(z.real) and math.isfinite(z.imag)
