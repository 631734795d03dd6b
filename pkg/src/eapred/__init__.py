"""Earnings-announcement price-direction prediction pipeline."""

__version__ = "0.1.0"
