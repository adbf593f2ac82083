"""Measuring and reducing demographic bias in clinical-note classifiers."""

__version__ = "0.1.0"
