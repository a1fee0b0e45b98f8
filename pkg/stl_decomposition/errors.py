"""
DECOMPOSITION ERRORS
One exception hierarchy for the whole engine.

Every class carries the process exit code the command-line surface maps it to:
    0 success, 1 contract/geometry errors, 2 input problems (conflicts,
    connectivity, scenario schema), 3 infeasible decomposition,
    4 solver failure, 5 soundness violation, 6 internal invariant.
"""

from typing import Any, Dict, List, Optional


class DecompositionError(Exception):
    """Base class of every error raised by the engine."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class ContractViolation(DecompositionError, ValueError):
    """A caller broke an operation's precondition."""


class EmptySumError(ContractViolation):
    """Minkowski sum requested over an empty list of summands."""


class BoundednessError(DecompositionError):
    """An H-representation does not describe a bounded set."""


class EmptyPolytopeError(DecompositionError):
    """An H-representation has no feasible point."""


class HorizonError(DecompositionError):
    """A signal does not cover the interval a task needs."""


class ConnectivityError(DecompositionError):
    """A graph that must be connected is not, or two agents are unreachable."""

    exit_code = 2


class CapacityError(DecompositionError):
    """Too many Always tasks on one edge for power-set enumeration."""

    exit_code = 2


class ScenarioError(DecompositionError):
    """A scenario document failed to parse or validate.

    Args:
        message: headline
        issues: every violation found, each prefixed with its location
    """

    exit_code = 2

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        super().__init__(message, {"issues": list(issues or [])})
        self.issues = list(issues or [])

    def __str__(self) -> str:
        if not self.issues:
            return super().__str__()
        return super().__str__() + "\n" + "\n".join(f"  - {i}" for i in self.issues)


class InputConflictError(DecompositionError):
    """The input task graph already contains a conflicting conjunction."""

    exit_code = 2


class InfeasibleDecompositionError(DecompositionError):
    """The decomposition program has no feasible point."""

    exit_code = 3


class SolverError(DecompositionError):
    """Numerical failure inside the conic solver or the decentralized loop."""

    exit_code = 4


class DivergenceError(SolverError):
    """Penalties kept growing during the decentralized run."""


class SoundnessViolationError(DecompositionError):
    """A rewritten task set failed the implication oracle."""

    exit_code = 5


class InternalInvariantError(DecompositionError, AssertionError):
    """A structural invariant of the assembled program does not hold."""

    exit_code = 6
