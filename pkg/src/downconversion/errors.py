"""Exception hierarchy shared by the simulation layers."""


class DownconversionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DownconversionError, ValueError):
    """Invalid or unparseable configuration.

    ``key`` names the offending configuration entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class TruncationError(DownconversionError):
    """The requested Fock-space truncation cannot hold the state to tolerance."""


class IntegrityError(DownconversionError):
    """A state failed a structural check (norm, finiteness)."""


class IntegrationError(DownconversionError):
    """A time integration failed or drifted beyond its tolerance.

    Carries the module name, the time reached and, for sector propagation,
    the sector index.
    """

    def __init__(self, message, module=None, time=None, sector=None):
        self.module = module
        self.time = time
        self.sector = sector
        parts = []
        if module is not None:
            parts.append(module)
        if sector is not None:
            parts.append(f"sector N={sector}")
        if time is not None:
            parts.append(f"t={time:.6g}")
        prefix = f"[{', '.join(parts)}] " if parts else ""
        super().__init__(prefix + message)


class BasisTooSmallError(IntegrationError):
    """Population leaked into the top of an adaptive-frame basis."""

    def __init__(self, message, mode, leakage, module="exactdyn", time=None):
        self.mode = mode
        self.leakage = leakage
        super().__init__(message, module=module, time=time)


class AnalysisError(DownconversionError, ValueError):
    """Trajectory data inconsistent with the requested analysis."""
