"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 usage, 2 input, 3 not identified, 4 positivity, 5 numerical.
"""

from __future__ import annotations


class CausalError(Exception):
    exit_code = 1


# -- input (exit 2) ---------------------------------------------------------

class InputError(CausalError):
    exit_code = 2


class GraphError(InputError):
    pass


class CycleDetected(GraphError):
    pass


class DuplicateName(GraphError):
    pass


class DanglingEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class UnknownVariable(GraphError):
    def __init__(self, name: str):
        super().__init__(f"unknown variable '{name}'")
        self.name = name


class OverlappingSets(GraphError):
    pass


class InterveningOnUnobserved(GraphError):
    pass


class UnsupportedGraph(GraphError):
    pass


class UnobservedInW(GraphError):
    pass


class OrderViolation(GraphError):
    pass


class DataError(InputError):
    pass


class SchemaMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class ContinuousVariable(DataError):
    pass


class MissingPredictor(DataError):
    pass


class ValueOutOfDomain(DataError):
    pass


# -- identification (exit 3) ------------------------------------------------

class NotIdentified(CausalError):
    exit_code = 3


class BackdoorViolation(NotIdentified):
    pass


class SequentialIgnorabilityFails(NotIdentified):
    pass


# -- positivity (exit 4) ----------------------------------------------------

class PositivityViolation(CausalError):
    exit_code = 4


# -- numerical (exit 5) -----------------------------------------------------

class NumericalError(CausalError):
    exit_code = 5


class ModelFitError(NumericalError):
    pass


class RankDeficient(ModelFitError):
    pass


class InsufficientRows(ModelFitError):
    pass


class Separation(ModelFitError):
    pass


class NoConvergence(ModelFitError):
    pass


class SingularMatrix(NumericalError):
    pass


class StateSpaceTooLarge(NumericalError):
    pass


class EstimatorFailedOnResample(NumericalError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"estimator failed on bootstrap resample {index}: {cause}")
        self.index = index
        self.cause = cause


class InsufficientDataWarning(UserWarning):
    """Chi-squared test answered with too many sparse cells."""


class NegativeMassWarning(UserWarning):
    """Misclassification correction clipped more than 0.01 of negative probability mass."""
