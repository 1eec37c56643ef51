"""Exception hierarchy shared by all modules."""


class BnError(Exception):
    """Base class for every error raised by this package."""


class DataError(BnError):
    """Bad input data: missing file, malformed CSV, NaN cells, constant columns."""


class GraphError(BnError):
    """Graph contract violation: unknown node, self-loop, mismatched node sets."""


class CycleError(GraphError):
    """A directed cycle where acyclicity is required.

    ``witness`` carries a node sequence demonstrating the cycle (or the
    obstruction set when no explicit cycle could be isolated).
    """

    def __init__(self, message, witness=()):
        super().__init__(message)
        self.witness = tuple(witness)


class ConstraintError(BnError):
    """Blacklist/whitelist specification is self-contradictory."""


class StatsError(BnError):
    """Numerical failure inside a statistical primitive."""


class DegenerateTestError(StatsError):
    """Singular sub-correlation matrix: the conditioning set is collinear."""


class DofExhaustionError(StatsError):
    """Too few observations for the requested conditioning-set size.

    ``conditioning`` names the offending set.
    """

    def __init__(self, message, conditioning=()):
        super().__init__(message)
        self.conditioning = tuple(sorted(conditioning))


class SingularDesignError(StatsError):
    """OLS normal equations are singular (collinear regressors)."""


class ConfigError(BnError):
    """Invalid run configuration. ``field`` is the offending field path."""

    def __init__(self, message, field=""):
        super().__init__(message)
        self.field = field


class PipelineError(BnError):
    """A pipeline stage failed. ``stage`` names the failing step."""

    def __init__(self, message, stage=""):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage
