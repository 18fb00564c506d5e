"""Valuation of energy-inefficient dwellings under carbon-price transition scenarios."""

__version__ = "0.1.0"
