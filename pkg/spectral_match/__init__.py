"""Feature-based one-sided matching via the principal singular direction."""

from .market_model import Allocation, Market, validate_market
from .mechanism import svd_match, svd_match_2d
from .spectral import diagnose, svd

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "Market",
    "diagnose",
    "svd",
    "svd_match",
    "svd_match_2d",
    "validate_market",
]
