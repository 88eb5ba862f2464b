"""Multi-patch isogeometric analysis: coupling strategies and benchmark studies."""

__version__ = "0.1.0"
