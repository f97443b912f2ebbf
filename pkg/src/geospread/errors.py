"""Exception hierarchy shared across the package."""


class GeospreadError(Exception):
    """Base class for all package-specific errors."""


class UnreadableFile(GeospreadError):
    """An input file could not be opened or read."""


class FormatMismatch(GeospreadError):
    """More than half of the records in a file failed to parse."""


class InsufficientEvidence(GeospreadError):
    """A user trace has fewer points than required for home estimation."""


class DegenerateMidpoint(GeospreadError):
    """The mean position vector vanished (balanced antipodal points)."""


class NoRegions(GeospreadError):
    """Region assignment was asked to pick from no usable regions."""


class EmptySet(GeospreadError):
    """A metric was evaluated over zero messages."""


class EmptySeries(GeospreadError):
    """A window series has no non-empty window."""


class DegenerateFit(GeospreadError):
    """A lowess neighborhood has no points; valid inputs never raise this."""


class EmptyAfterPreprocess(GeospreadError):
    """No documents survived topic-model preprocessing."""


class NoTokens(GeospreadError):
    """All held-out tokens were out of vocabulary."""


class EmptyForest(GeospreadError):
    """A propagation forest contains no posting users."""
