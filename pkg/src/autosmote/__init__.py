"""Learnable synthetic minority oversampling with decision criteria."""

__version__ = "0.1.0"
