"""Desk-scale learned image codec with mixed or separate hyperprior decoders."""

__version__ = "0.1.0"
