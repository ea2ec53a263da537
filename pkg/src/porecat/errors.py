"""Exception types shared across the package."""


class PorecatError(Exception):
    """Base class for all package errors."""


class ConfigError(PorecatError):
    """Invalid configuration: bad geometry/scheme parameters, schema violations,
    dangling species references. CLI exit code 1."""


class SolverError(PorecatError):
    """Linear or nonlinear solver failure (divergence, NaN states, dt underflow).
    CLI exit code 2."""


class ValidationFailure(PorecatError):
    """Raised by the run gate when a structural-assumption validator fails and
    --force was not given. CLI exit code 3."""
