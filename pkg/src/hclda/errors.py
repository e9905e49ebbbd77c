"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2), numerical
breakdowns from :class:`NumericalError` (CLI exit code 3).
"""


class HcldaError(Exception):
    """Base class for all package errors."""


class InputError(HcldaError, ValueError):
    pass


class NumericalError(HcldaError, ArithmeticError):
    pass


class InvalidDataset(InputError):
    pass


class InvalidDimension(InputError):
    pass


class InvalidInput(InputError):
    pass


class InvalidPartition(InputError):
    pass


class InsufficientData(InputError):
    pass


class ParseError(InputError):
    pass


class SingularMatrix(NumericalError):
    pass


class DegenerateEigenvalue(NumericalError):
    pass


class LeverageOverflow(NumericalError):
    pass
