"""Exception types shared across the package."""


class TrussError(Exception):
    """Base class for all isotruss errors."""


class TopologyError(TrussError):
    """Truss description violates a structural invariant."""


class UnknownVertex(TrussError):
    """Vertex index out of range."""


class UnknownRoller(TrussError):
    """Roller index out of range."""


class DegenerateEdge(TrussError):
    """An edge has (near) zero length; unit direction is undefined."""


class InfeasibleEdgeRates(TrussError):
    """Requested vertex velocities need edge rates no roller pattern can produce."""


class InitializationUnsafe(TrussError):
    """Barrier value is negative at the current state; refusing to control."""


class SingularAugmentedMatrix(TrussError):
    """Rigidity rows plus fixed-DOF rows are singular; forward kinematics undefined.

    Carries ``last_state`` (flat position vector) when raised mid-integration so
    callers can recover the last well-posed configuration.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class NonmonotonicTime(TrussError):
    """Encoder frames arrived out of order."""


class EmptyTrace(TrussError):
    """A trajectory metric was asked for on an empty or non-overlapping trace."""


class SchemaError(TrussError):
    """Scenario text failed validation.

    ``problems`` is a list of "field.path: message" strings.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
