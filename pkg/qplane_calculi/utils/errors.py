from typing import Any, Optional

__all__ = [
    'CalculusError',
    'DivisionByZeroError',
    'IncompatibleStructureError',
    'InconsistentDerivationError',
    'NonInvertibleError',
    'ParseError',
    'PoleError',
    'PresetError',
    'QPlaneError',
    'UnsupportedError'
]


class QPlaneError(Exception):
    """Root of every error raised by the workbench."""

    def __init__(self, value: Any):
        super().__init__(value)
        self.value = value

    def __str__(self):
        return str(self.value)


class DivisionByZeroError(QPlaneError, ZeroDivisionError):
    pass


class PoleError(QPlaneError):
    """
    A coefficient has no finite value at q = 1.

    Parameters
    ----------
    value : str
        Human readable description of where the pole sits.
    where : Any, default None
        The offending monomial, matrix entry or index tuple.
    order : int, default None
        The order of the pole at q = 1.
    """

    def __init__(self, value: str, where: Any = None, order: Optional[int] = None):
        super().__init__(value)
        self.where = where
        self.order = order


class NonInvertibleError(QPlaneError):
    pass


class InconsistentDerivationError(QPlaneError):
    pass


class CalculusError(QPlaneError):
    pass


class IncompatibleStructureError(CalculusError):
    pass


class UnsupportedError(QPlaneError):
    pass


class ParseError(QPlaneError):
    """
    Syntax or symbol error in an expression.

    Parameters
    ----------
    value : str
        What went wrong.
    position : int
        Zero-based character offset into the parsed text.
    """

    def __init__(self, value: str, position: int = 0):
        super().__init__(value)
        self.position = position

    def __str__(self):
        return f"{self.value} (at position {self.position})"


class PresetError(QPlaneError):
    pass
