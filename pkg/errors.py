"""Exception types shared by the library, the CLI and the HTTP service."""


class SSCError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(SSCError, ValueError):
    """Invalid parameter, config file or input file (CLI exit code 2)."""


class NumericalError(SSCError, ArithmeticError):
    """Numerical failure: non-finite data, failed decomposition (exit code 3)."""
