"""Exception types raised across the package."""


class PendgravError(Exception):
    """Base class for all package errors."""


class UnstableTrapError(PendgravError, ValueError):
    """Total stiffness (pendulum + optical spring) is not positive."""


class CollisionError(PendgravError, ValueError):
    """Source-mass drive amplitude reaches the mean separation."""


class GridError(PendgravError, ValueError):
    """Empty, unsorted or mismatched frequency grids."""


class ConfigError(PendgravError, ValueError):
    """Malformed configuration text or an invariant violation.

    ``line`` is the 1-based line number for syntax errors, ``field`` the
    offending dotted key for invariant violations.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class RecordError(PendgravError, ValueError):
    """Bad time series arguments or a corrupt record file."""


class FitError(PendgravError, RuntimeError):
    """Resonance fit did not converge."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class NoPeakError(FitError):
    """No resonance peak inside the requested band."""


class NonDecayingError(PendgravError, RuntimeError):
    """Ringdown envelope does not decay."""


class OptimizationError(PendgravError, RuntimeError):
    """Objective was never finite at any start."""
