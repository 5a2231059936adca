"""Steinberg generators for black box groups of Lie type in odd characteristic."""

__version__ = "0.1.0"
