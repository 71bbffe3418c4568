"""Exception and warning types raised across the package."""


class SpatialExitError(Exception):
    """Base class for all package errors."""


# -- ingestion --------------------------------------------------------------

class PanelError(SpatialExitError):
    pass


class MissingColumn(PanelError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing column {column!r}")


class RowError(PanelError):
    """A data row that violates a record invariant.

    ``row`` is the 1-based line number in the source file (header is line 1).
    """

    reason = "invalid row"

    def __init__(self, row, detail=""):
        self.row = row
        self.detail = detail
        msg = f"row {row}: {self.reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BadCoordinate(RowError):
    reason = "bad coordinate"


class BadIndustryCode(RowError):
    reason = "bad industry code"


class BadField(RowError):
    reason = "bad field value"


class DuplicateId(RowError):
    reason = "duplicate id"

    def __init__(self, row, id_):
        self.id = id_
        super().__init__(row, id_)


class EmptyFilter(PanelError):
    pass


class TooFewRows(PanelError):
    pass


class ConstantColumn(PanelError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} has no variation in this cell")


# -- estimation -------------------------------------------------------------

class EstimationError(SpatialExitError):
    pass


class SingularSystem(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class PerfectSeparation(EstimationError):
    pass


class AllSameOutcome(EstimationError):
    pass


class DegenerateRhoGradient(EstimationError):
    pass


class StepOutOfDomain(EstimationError):
    pass


class ProbabilityUnderflow(EstimationError):
    pass


class NonFiniteDensity(EstimationError):
    pass


class OracleScaleLimit(SpatialExitError):
    pass


class NoConvergence(UserWarning):
    """Issued when an iterative fit stops at ``max_iter``; the last iterate is kept."""
