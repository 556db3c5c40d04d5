"""d2d: lightweight tagged markup, parsed with total error recovery to XML."""

__version__ = "0.1.0"
