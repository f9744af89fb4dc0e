"""Exception types shared across the pipeline."""
from __future__ import annotations

from .symexpr import ParityViolation, OddEvaluation, UnboundSymbol  # noqa: F401  (re-export)


class ParseError(Exception):
    """Positioned diagnostic from the ``.lag`` reader."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


class DslSyntaxError(ParseError):
    pass


class UnknownSymbol(ParseError):
    pass


class NonAutonomous(ParseError):
    pass


class DuplicateCoord(ParseError):
    pass


class DslParityViolation(ParseError, ParityViolation):
    pass


class GaugeFreedom(Exception):
    """Undetermined evolution or first-class constraints: fix a gauge first."""


class Inconsistent(Exception):
    pass


class UnsolvableConstraint(Exception):
    pass


class NonConservedHamiltonian(Exception):
    pass


class OddHamiltonian(ParityViolation):
    pass


class BasisInsufficient(Exception):
    pass


class NonUniqueBrackets(Exception):
    def __init__(self, message: str, nullspace_dim: int = 0, witness=None):
        super().__init__(message)
        self.nullspace_dim = nullspace_dim
        self.witness = witness


class VerificationFailure(Exception):
    pass


class CovarianceViolation(VerificationFailure):
    pass


class JacobiViolation(VerificationFailure):
    pass


class EquivalenceViolation(VerificationFailure):
    pass


class StepRejected(VerificationFailure):
    pass


class NonTerminating(Exception):
    pass


class SingularMatrix(Exception):
    pass
