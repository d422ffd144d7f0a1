"""medgate: aggregate-only clinical data sharing gateway."""

__version__ = "0.1.0"
