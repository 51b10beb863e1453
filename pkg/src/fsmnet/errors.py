"""Error types shared across the package.

The CLI maps ConfigError to exit code 2 and NumericError to exit code 3;
everything else is a plain bug and surfaces as a traceback.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad field values, infeasible mask budgets, etc."""


class CheckpointError(ConfigError):
    """Checkpoint archive does not match the model it is being loaded into."""


class NumericError(RuntimeError):
    """Numeric failure at runtime: non-finite values, excessive imaginary residue."""
