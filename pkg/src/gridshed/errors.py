"""Exception types shared across the package.

The CLI maps these onto stable exit codes: config errors exit 1, data
errors exit 2, solver errors exit 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; message names the offending key."""


class DataError(ValueError):
    """Broken input data (schema mismatch, gaps, insufficient coverage)."""


class SolverError(RuntimeError):
    """Optimization failed or returned a plan that fails verification."""
