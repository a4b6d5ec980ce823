"""Exceptions that must be importable without pulling in torch."""


class NumericError(RuntimeError):
    """Training produced a non-finite loss."""
