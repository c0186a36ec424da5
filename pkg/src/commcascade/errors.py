"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad experiment configuration; the CLI maps this to exit code 2."""


class InvariantViolation(RuntimeError):
    """A numerical invariant failed; the CLI maps this to exit code 3."""
