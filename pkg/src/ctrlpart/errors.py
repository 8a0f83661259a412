"""Exception types shared across the package."""


class CtrlPartError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionMismatchError(CtrlPartError):
    """A matrix or vector has a shape inconsistent with the model.

    Carries the name of the offending quantity so callers can report it.
    """

    def __init__(self, name, expected, got):
        self.name = name
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(f"{name}: expected shape {self.expected}, got {self.got}")


class JacobianError(CtrlPartError):
    """A Jacobian entry evaluated to a non-finite value."""

    def __init__(self, block, row, col, value):
        self.block = block
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"non-finite Jacobian entry {block}[{row},{col}] = {value!r}")


class GuardOverlapError(CtrlPartError):
    """Two mode guards were both strictly satisfied at a sample point."""


class UnactuatedInputError(CtrlPartError):
    """An input vertex has no outgoing edge, so no unit can be rooted on it."""

    def __init__(self, vertex_names):
        self.vertex_names = tuple(vertex_names)
        super().__init__(
            "input vertices without outgoing edges: "
            + ", ".join(self.vertex_names)
            + " (a fundamental unit needs at least one input and one state)"
        )


class OrphanVertexError(CtrlPartError):
    """State vertices with no incident edges cannot be attached to any unit."""

    def __init__(self, vertex_names):
        self.vertex_names = tuple(vertex_names)
        super().__init__(
            "state vertices with no edges at all: " + ", ".join(self.vertex_names)
        )


class PartitionError(CtrlPartError):
    """A block structure is not a valid non-overlapping cover of the units."""


class SizeGuardError(CtrlPartError):
    """The instance is too large for exhaustive enumeration."""


class SolverError(CtrlPartError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)
