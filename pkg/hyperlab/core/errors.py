"""
Exception hierarchy for hyperlab.

Every error carries the process exit code the CLI maps it to:
2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

from typing import Optional


class HyperlabError(Exception):
    exit_code = 1

    def __init__(self, message: str, config_path: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.config_path = config_path

    def __str__(self) -> str:
        if self.config_path:
            return f"{self.config_path}: {self.message}"
        return self.message


# ---------------------------------------------------------------------
# Validation failures (exit 2)
# ---------------------------------------------------------------------
class ConfigError(HyperlabError, ValueError):
    exit_code = 2


class DomainError(ConfigError):
    pass


class InsufficientSamplesError(ConfigError):
    pass


# ---------------------------------------------------------------------
# Numerical failures (exit 3)
# ---------------------------------------------------------------------
class NumericalError(HyperlabError, ArithmeticError):
    exit_code = 3


class SolverFailure(NumericalError):
    def __init__(self, message: str, z: complex = 0j, w: complex = 0j, residual: float = float("nan")):
        super().__init__(f"{message} (z={z}, w={w}, residual={residual:.3e})")
        self.z = z
        self.w = w
        self.residual = residual


class BranchAmbiguityError(NumericalError):
    pass


class SingularDerivativeError(NumericalError):
    pass


class StabilityDegenerateError(NumericalError):
    pass


class LogSingularityError(NumericalError):
    pass


class SingularIntegralError(NumericalError):
    pass


class FlowTerminationError(NumericalError):
    def __init__(self, message: str, crossing_time: float):
        super().__init__(f"{message} (crossing at t={crossing_time:.6g})")
        self.crossing_time = crossing_time
