"""Exception hierarchy.

``InputError`` covers bad arguments, malformed files and invalid
configurations (the CLI exits with status 2).  ``ComputationError`` covers
failures that only show up while computing (exit status 1).
"""


class DscoreError(Exception):
    """Base class for every error raised by this package."""


class InputError(DscoreError, ValueError):
    pass


class ComputationError(DscoreError, RuntimeError):
    pass


# graph
class CycleDetected(InputError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("graph has a cycle: " + " -> ".join(map(str, self.cycle)))


class SelfLoop(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class LengthMismatch(InputError):
    pass


class OverlappingArguments(InputError):
    pass


class TooManyEdges(InputError):
    pass


class InvalidAttachment(InputError):
    pass


class DimensionMismatch(InputError):
    pass


# bayesnet / randomness / score
class StateOutOfRange(InputError):
    pass


class CardinalityMismatch(InputError):
    pass


class NonPositiveAlpha(InputError):
    pass


class NonPositiveConcentration(InputError):
    pass


class NonPositiveLambda(InputError):
    pass


class InvalidMeasureParam(InputError):
    pass


class InvalidM(InputError):
    pass


class ConfigError(InputError):
    pass


class StateSpaceTooLarge(ComputationError):
    pass


class ZeroContext(ComputationError):
    pass


class GenerationFailed(ComputationError):
    pass


class NoAdmissibleSet(ComputationError):
    pass


class DegenerateJoint(ComputationError):
    pass


class EmptyCandidateSet(ComputationError):
    pass


class NonFiniteCriterion(ComputationError):
    pass


# BIF parsing; every error carries a source position
class BifError(InputError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class BifSyntaxError(BifError):
    pass


class UndeclaredVariable(BifError):
    pass


class UnknownState(BifError):
    pass


class ArityMismatch(BifError):
    pass


class NonNormalizedRow(BifError):
    pass


class DuplicateBlock(BifError):
    pass


class MissingBlock(BifError):
    pass


class UnsupportedFeature(BifError):
    pass
