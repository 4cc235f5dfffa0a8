"""Exception hierarchy shared across the package."""


class MobsimError(Exception):
    """Base class for every error raised by mobsim."""


class ValidationFailure(MobsimError):
    """Input data or a configuration did not pass validation (CLI exit code 1)."""


# providers
class SchemaViolation(ValidationFailure):
    pass


class UnknownSchema(ValidationFailure):
    pass


class Transport(MobsimError):
    pass


# population
class InconsistentTotals(ValidationFailure):
    pass


class NoConvergence(MobsimError):
    pass


class StructuralZero(ValidationFailure):
    pass


class EmptyJoint(ValidationFailure):
    pass


# geography / schedule
class DegenerateBbox(ValidationFailure):
    pass


class InsufficientCapacity(ValidationFailure):
    pass


class EmptyCatalog(ValidationFailure):
    pass


class NoRoutinePoi(MobsimError):
    pass


class NoCandidates(MobsimError):
    pass


class InvalidSchedule(ValidationFailure):
    pass


# routing
class UnknownStop(MobsimError):
    pass


class SnapFailure(MobsimError):
    pass


class Unreachable(MobsimError):
    pass


class NoFeasibleMode(MobsimError):
    pass


# io
class MissingFile(ValidationFailure):
    pass


class MalformedRow(ValidationFailure):
    def __init__(self, file: str, line: int, reason: str):
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason


class EmptyNetwork(ValidationFailure):
    pass


class IoFailure(MobsimError):
    pass
