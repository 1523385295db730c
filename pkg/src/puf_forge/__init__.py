"""Analysis and simulation toolkit for oxide-breakdown PUFs."""

__version__ = "0.1.0"
