"""
Errors raised by the segmenter packages.
"""


class CwsError(Exception):
    """Base class for segmenter errors."""


class ShapeError(CwsError, ValueError):
    """Operands of a tensor operation have incompatible shapes."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        joined = ' and '.join(str(tuple(s)) for s in shapes)
        super().__init__(f'{op}: incompatible shapes {joined}')


class GradientError(CwsError):
    """Backward pass or optimizer step cannot proceed."""


class NumericError(CwsError, ArithmeticError):
    """A non-finite value showed up where a finite one is required."""


class DataError(CwsError, ValueError):
    """Malformed corpus, embedding, mapping or checkpoint content."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class ConfigError(CwsError, ValueError):
    """Invalid run configuration."""
