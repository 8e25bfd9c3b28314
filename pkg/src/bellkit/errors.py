"""Exception hierarchy shared by every bellkit module.

Every error carries a machine-readable ``kind`` (the class name) so the CLI can
report it without string matching.
"""


class BellkitError(Exception):
    """Base class for domain errors raised by the library."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class ShapeMismatch(BellkitError):
    pass


class NormalizationError(BellkitError):
    pass


class NonBinaryOutcomes(BellkitError):
    pass


class WrongScenario(BellkitError):
    pass


class TooLarge(BellkitError):
    pass


class LpNumericalFailure(BellkitError):
    pass


class DimensionTooLarge(BellkitError):
    pass


class DegenerateVertexSet(BellkitError):
    pass


class DimensionMismatch(BellkitError):
    pass


class InvalidPovm(BellkitError):
    pass


class InvalidState(BellkitError):
    pass


class BadFactorization(BellkitError):
    pass


class NotDichotomic(BellkitError):
    pass


class BadW(BellkitError):
    pass


class BadAlpha(BellkitError):
    pass


class BadVector(BellkitError):
    pass


class NegativeWeight(BellkitError):
    pass


class NoConvergence(BellkitError):
    pass


class SuperQuantumS(BellkitError):
    pass


class MissingDb(BellkitError):
    pass


class BadNormalization(BellkitError):
    pass


class BadBounds(BellkitError):
    pass


class SignalingInput(BellkitError):
    pass


class UnknownCurve(BellkitError):
    pass
