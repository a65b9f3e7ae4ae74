"""Market-based CPU scheduling and cluster allocation simulators."""

__version__ = "0.1.0"
