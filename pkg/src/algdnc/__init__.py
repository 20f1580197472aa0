"""Worst-case delay bounds for feed-forward networks with (min,+) algebra."""

__version__ = "0.1.0"
