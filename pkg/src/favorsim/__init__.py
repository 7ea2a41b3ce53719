"""Spectrum-usage favor exchange between two co-located small-cell operators."""

__version__ = "0.1.0"
