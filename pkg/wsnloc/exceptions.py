"""Exceptions raised by wsnloc."""

from .const import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_IO


class WsnlocError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class ConfigurationError(WsnlocError):
    """Invalid configuration value or file."""

    exit_code = EXIT_CONFIG


class DegenerateGeometryError(WsnlocError):
    """The Gram matrix does not have p positive eigenvalues."""

    exit_code = EXIT_DEGENERATE

    def __init__(self, message: str, eigenvalue: float | None = None) -> None:
        super().__init__(message)
        self.eigenvalue = eigenvalue


class OutputError(WsnlocError):
    """Reading or writing a file failed."""

    exit_code = EXIT_IO

    def __init__(self, message: str, path: str | None = None) -> None:
        super().__init__(message)
        self.path = path


class DomainError(WsnlocError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = EXIT_CONFIG


class SingularityError(DomainError):
    """Two positions collapsed inside a log-distance term."""


class ProtocolError(WsnlocError):
    """A node was flagged as receiver but holds no broadcast message."""
