"""Finitary random interlacements on Z^d: samplers, walk estimators and phase exploration."""

__version__ = "0.1.0"
