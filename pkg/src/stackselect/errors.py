"""Exception hierarchy shared by every module."""


class StackSelectError(Exception):
    """Base class for all library errors."""


class InvalidVolume(StackSelectError):
    pass


class InvalidParameter(StackSelectError):
    pass


class RequiresIsotropic(StackSelectError):
    pass


class IndexOutOfRange(StackSelectError):
    pass


class RankTooLarge(StackSelectError):
    pass


class InvalidMatrix(StackSelectError):
    pass


class ShapeMismatch(StackSelectError):
    pass


class SingularSystem(StackSelectError):
    pass


class DegenerateTensor(StackSelectError):
    pass


class EmptyMask(StackSelectError):
    pass


class InsufficientStacks(StackSelectError):
    pass


class DivisionByZeroBaseline(StackSelectError):
    pass


class EmptyInput(StackSelectError):
    pass


class DegenerateTruth(StackSelectError):
    pass


class UnsupportedFormat(StackSelectError):
    pass


class CorruptFile(StackSelectError):
    pass


class IoError(StackSelectError):
    pass


class StackError(StackSelectError):
    """Wraps a failure while assessing one stack; carries the stack id."""

    def __init__(self, stack_id: str, cause: Exception):
        super().__init__(f"stack {stack_id!r}: {cause}")
        self.stack_id = stack_id
        self.cause = cause


class TrialError(StackSelectError):
    """Wraps a failure inside one trial of a suite; carries the trial index."""

    def __init__(self, trial_index: int, cause: Exception):
        super().__init__(f"trial {trial_index}: {cause}")
        self.trial_index = trial_index
        self.cause = cause
