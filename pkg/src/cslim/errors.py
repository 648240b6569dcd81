"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`CSLIMError`
so callers (the experiment harness in particular) can catch estimator and
data failures without swallowing programming errors.
"""


class CSLIMError(Exception):
    """Base class for all package errors."""


# linear algebra
class MatrixFunctionError(CSLIMError, ArithmeticError):
    pass


class NonFiniteInput(MatrixFunctionError):
    pass


class EigenvalueOnBranchCut(MatrixFunctionError):
    """Matrix has an eigenvalue on the closed negative real axis."""


class SingularMatrix(MatrixFunctionError):
    pass


class NotPSD(MatrixFunctionError):
    pass


class UnstableDynamics(MatrixFunctionError):
    pass


class SingularCovariance(MatrixFunctionError):
    pass


# simulation
class UnstableMean(CSLIMError, ValueError):
    pass


class DiffusionGoesNegative(CSLIMError, ValueError):
    pass


class RejectionBudgetExceeded(CSLIMError, RuntimeError):
    pass


class NumericalBlowup(CSLIMError, ArithmeticError):
    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class StrideMisaligned(CSLIMError, ValueError):
    pass


# estimation
class LagExceedsRecord(CSLIMError, ValueError):
    pass


class EmptyCell(CSLIMError, ValueError):
    pass


class TooFewPhases(CSLIMError, ValueError):
    pass


class IndivisibleInterval(CSLIMError, ValueError):
    pass


class GridMismatch(CSLIMError, ValueError):
    pass


# post-processing
class BadWindow(CSLIMError, ValueError):
    pass


class BadCutoff(CSLIMError, ValueError):
    pass


class ZeroTruth(CSLIMError, ValueError):
    pass


class AllPhasesFlagged(CSLIMError, ValueError):
    pass


class EmptyOverlap(CSLIMError, ValueError):
    pass


# data / harness
class DataError(CSLIMError, ValueError):
    pass


class ParseError(DataError):
    pass


class GapInRecord(DataError):
    pass


class TooShort(DataError):
    pass


class ConfigError(CSLIMError, ValueError):
    pass


class UnknownKind(ConfigError):
    pass


class FailureBudgetExceeded(CSLIMError, RuntimeError):
    """More trials failed numerically than the experiment allows."""
