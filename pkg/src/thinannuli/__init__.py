"""Exponential return-time laws and thin-annuli geometry for conformal IFS."""

__version__ = "0.1.0"
