"""Exception types shared across the package."""


class ActnetError(Exception):
    """Base class for package errors."""


class InvalidParameterError(ActnetError, ValueError):
    """A parameter violates its documented domain."""


class GraphGenerationError(ActnetError, RuntimeError):
    """A random-graph generator exhausted its retry budget."""


class InfeasibleGraphError(ActnetError, ValueError):
    """The requested (n, degree) combination admits no simple graph."""


class EdgeListParseError(ActnetError, ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DisconnectedGraphError(ActnetError, ValueError):
    """An operation that needs a connected graph got a disconnected one."""


class CooperationInfeasibleError(ActnetError, ValueError):
    """critical benefit-to-cost ratio undefined: denominator is non-positive."""


class MutationConflictError(ActnetError, ValueError):
    """Absorption-style runs require mutation to be disabled (and vice versa)."""
