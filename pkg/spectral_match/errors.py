"""Exception types shared by the matching engine and its command line."""
from __future__ import annotations


class SpectralMatchError(Exception):
    """Base error; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class MarketValidationError(SpectralMatchError, ValueError):
    exit_code = 2


class DimensionMismatch(MarketValidationError):
    pass


class CapacityMismatch(MarketValidationError):
    pass


class NonFiniteEntry(MarketValidationError):
    pass


class EmptyMarket(MarketValidationError):
    pass


class InvalidAllocation(MarketValidationError):
    pass


class MalformedInput(MarketValidationError):
    """A market or config file could not be parsed."""


class ConfigError(MarketValidationError):
    pass


class EmptySample(MarketValidationError):
    pass


class DegenerateAllTies(MarketValidationError):
    """Kendall tau is undefined because one score vector is constant."""


class DegenerateSpectrum(SpectralMatchError):
    """The feature matrix has no principal direction (sigma_1 == 0)."""

    exit_code = 3


class AllZeroSpectrum(DegenerateSpectrum):
    pass


class ConvergenceFailure(SpectralMatchError, RuntimeError):
    exit_code = 3


class OracleTooLarge(SpectralMatchError):
    exit_code = 4


class TieWarning(UserWarning):
    """sigma_1 and sigma_2 are too close for v_1 to be well determined."""
