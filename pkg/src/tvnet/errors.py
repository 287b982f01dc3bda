"""Exception hierarchy shared across the package."""


class TvnetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TvnetError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class DataError(TvnetError):
    """Unusable input data: non-numeric cells, missing values, too short (exit 3)."""


class SingularDesign(TvnetError):
    """The weighted local-linear normal matrix is numerically singular.

    Usually signals a bandwidth too small for the design density.
    """


class AllSingular(TvnetError):
    """No bandwidth on the candidate grid produced a usable fit."""


class LagTooLarge(TvnetError):
    """Requested differencing lag is at least the series length."""


class DegenerateVariance(TvnetError):
    """An estimated marginal variance curve fell below the positivity floor."""


class BlockTooLong(TvnetError):
    """Long-run-variance block length m exceeds n/3."""


class BandwidthTooLarge(TvnetError):
    """The maximal bandwidth leaves no room for the rearranged block layout."""


class WindowTooLarge(TvnetError):
    """Bootstrap window size w is incompatible with the block layout."""


class GridTooSmall(TvnetError):
    """A tuning grid is too short to contain an interior cell."""


class DomainError(TvnetError):
    """Evaluation requested outside the domain where curves are defined."""
