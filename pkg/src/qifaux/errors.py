"""Exception types raised across the package."""


class QifauxError(Exception):
    """Base class for all package-specific errors."""


class DimensionTooSmall(QifauxError, ValueError):
    """Cluster size too small for the requested correlation structure."""


class PartitionViolation(QifauxError, ValueError):
    """A subject matched zero or more than one subgroup."""


class EmptySubgroup(QifauxError, ValueError):
    """A subgroup contains no subjects."""

    def __init__(self, group):
        self.group = group
        super().__init__(f"subgroup {group} contains no subjects")


class SingularWeightMatrix(QifauxError, RuntimeError):
    """Moment weight matrix has rank below the parameter dimension."""


class RankDeficient(QifauxError, RuntimeError):
    """Moment Jacobian lost rank; the parameter is not identified."""


class TooManyFailures(QifauxError, RuntimeError):
    """More than the tolerated share of Monte Carlo replications failed."""


class MalformedRow(QifauxError, ValueError):
    """A data file row could not be parsed."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class UnbalancedSubject(QifauxError, ValueError):
    """A subject has contradictory rows (duplicate time index)."""

    def __init__(self, subject_id):
        self.subject_id = subject_id
        super().__init__(f"subject {subject_id!r} has duplicate time indices")


class EmptyDataset(QifauxError, ValueError):
    """No usable subjects remain after loading."""


class ZeroVariance(QifauxError, ValueError):
    """A column selected for standardization is constant."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has zero variance")


class InvalidSize(QifauxError, ValueError):
    """Requested split size is out of range."""


class WeightRankWarning(RuntimeWarning):
    """Weight matrix was rank-deficient; a pseudo-inverse was used."""
