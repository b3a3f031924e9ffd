"""Trust-aware multi-stage route recommendation games."""

__version__ = "0.1.0"
