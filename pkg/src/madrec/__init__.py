"""Multi-aspect profile recommendation agent with re-ranking and self-feedback."""

__version__ = "0.1.0"
