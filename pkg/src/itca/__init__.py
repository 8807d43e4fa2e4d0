"""Class combination search by information-theoretic classification accuracy."""

__version__ = "0.1.0"
