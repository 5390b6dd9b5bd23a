"""Module that contains the exceptions raised by the toolkit."""


class QfsLabError(ValueError):
    """
    Base class for every precondition violation reported by the toolkit.
    """


class DimensionMismatchError(QfsLabError):
    """
    A point, matrix or network does not have the expected dimension.
    """


class NonFiniteInputError(QfsLabError):
    """
    An input contains NaN or infinite entries.
    """


class InvalidPermutationError(QfsLabError):
    """
    An image array is not a bijection of {1..n} or has the wrong degree.
    """


class GroupTooLargeError(QfsLabError):
    """
    Enumeration of a group exceeded the configured cap.
    """


class NotASubgroupError(QfsLabError):
    """
    A group expected to be a subgroup contains foreign elements.
    """


class InvalidCosetSystemError(QfsLabError):
    """
    Representatives do not form a complete system of coset representatives.
    """


class BudgetExceededError(QfsLabError):
    """
    A lattice computation would exceed its enumeration budget.
    """


class VacuousBoundError(QfsLabError):
    """
    A covering formula is evaluated outside the range where it means anything.
    """


class InvalidParameterError(QfsLabError):
    """
    A numeric parameter is outside its admissible range.
    """
