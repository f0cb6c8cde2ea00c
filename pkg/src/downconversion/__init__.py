"""Quantum dynamics of degenerate parametric down-conversion from a sub-harmonic vacuum.

Model layers, from crude to exact: classical amplitudes and the
linearized (undepleted pump) solution in :mod:`.baselines`, the mean-field
pendulum in :mod:`.meanfield`, and exact two-mode evolution in
:mod:`.exactdyn`. :mod:`.analysis` turns trajectories into conversion
efficiencies and optimum times; :mod:`.cli` is the command-line front end.
"""

__version__ = "0.1.0"

from .config import PropagatorSpec, SimConfig, TruncationSpec  # noqa: E402
from .observables import Observables, Trajectory  # noqa: E402

__all__ = [
    "PropagatorSpec",
    "SimConfig",
    "TruncationSpec",
    "Observables",
    "Trajectory",
    "__version__",
]
