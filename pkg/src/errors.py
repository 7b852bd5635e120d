class RabiChaosError(Exception):
    """Base class for every error raised by rabichaos."""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)


class DomainError(RabiChaosError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ConfigError(RabiChaosError, ValueError):
    """Run configuration failed validation."""


class ConfigParseError(ConfigError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericalGateError(RabiChaosError):
    """A numerical acceptance gate failed during a run."""

    exit_code = 2


class CutoffError(NumericalGateError):
    """Fock truncation discards more weight than allowed."""


class SingularityError(NumericalGateError):
    """Classical state drifted into the guard band of the Bloch boundary."""
