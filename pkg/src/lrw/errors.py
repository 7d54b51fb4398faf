"""Exception hierarchy.

Model errors describe an invalid or unsuitable transition law; numerical
errors describe a computation that did not converge or disagreed with
itself. The CLI maps the two families to different exit codes.
"""


class LRWError(Exception):
    """Base class for every error raised by this package."""


class ModelError(LRWError):
    """The transition law is invalid or outside a routine's domain."""


class NegativeProbability(ModelError):
    pass


class RowSumMismatch(ModelError):
    pass


class ZeroUpProbability(ModelError):
    pass


class DegenerateRow(ModelError):
    """A non-boundary row with p == 1 (no downward mass)."""


class BadDimension(ModelError):
    pass


class TransientModel(ModelError):
    pass


class NotPositiveRecurrent(ModelError):
    pass


class TailNotInD(ModelError):
    pass


class NotInD(ModelError):
    pass


class NotSummable(ModelError):
    pass


class NumericalError(LRWError):
    """A numerical routine failed to deliver a trustworthy value."""


class HorizonTooLarge(NumericalError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoConvergence(NumericalError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SeriesDivergent(NumericalError):
    pass


class MethodDisagreement(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass
