"""Exceptions raised by the riskqae modules.

The CLI maps them to exit codes: validation-type errors exit with 2 and
budget errors with 3.
"""

from typing import Optional


class RiskQaeError(Exception):
    """Base class for all riskqae errors."""


class ModelSyntaxError(RiskQaeError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ModelValidationError(RiskQaeError, ValueError):
    """A model file parsed but violates a structural invariant.

    Args:
        reason (str): Short code naming the invariant, e.g. "cycle" or "xor-sum".
        message (str): Human readable detail.
    """

    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(f"{reason}: {message}")


class CircuitError(RiskQaeError, ValueError):
    pass


class CompileError(RiskQaeError, ValueError):
    pass


class BudgetExceededError(RiskQaeError, RuntimeError):
    def __init__(self, what: str, required: int, limit: int):
        self.required = required
        self.limit = limit
        super().__init__(f"{what} needs {required}, limit is {limit}")


class SimulationError(RiskQaeError, RuntimeError):
    """The statevector lost normalisation or was given a circuit of the wrong size."""
