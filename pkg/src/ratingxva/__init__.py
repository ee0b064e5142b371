"""Counterparty-risk valuation adjustments with rating triggers."""

__version__ = "0.1.0"
