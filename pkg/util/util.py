"""Module that contains util functions."""

import math

import numpy as np
from scipy.special import gammaln

from common.constants import LN10
from common.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    NonFiniteInputError,
)


def as_point(x, dimension: int | None = None) -> np.ndarray:
    """
    Converts x to a finite float64 vector.
    :param x: array-like
    :param dimension: expected length, if any
    :return: np.ndarray
    """
    point = np.asarray(x, dtype=np.float64)
    if point.ndim != 1:
        raise DimensionMismatchError(f"Expected a vector, got shape {point.shape}.")
    if dimension is not None and point.shape[0] != dimension:
        raise DimensionMismatchError(
            f"Expected a point of dimension {dimension}, got {point.shape[0]}."
        )
    if not np.all(np.isfinite(point)):
        raise NonFiniteInputError("Points must not contain NaN or Inf.")
    return point


def ln_factorial(n: int) -> float:
    """
    Natural log of n! via log-gamma.
    """
    if n < 0:
        raise InvalidParameterError(f"Factorial of negative number {n}.")
    return float(gammaln(n + 1.0))


def log10_factorial(n: int) -> float:
    """
    log10(n!) via log-gamma.
    """
    return ln_factorial(n) / LN10


def ln_count(value: int | float) -> float:
    """
    Natural log of a positive count. Arbitrarily large Python ints are fine.
    """
    if value <= 0:
        raise InvalidParameterError(f"Expected a positive count, got {value}.")
    return math.log(value)


def ln_to_log10(value: float) -> float:
    """
    Converts a natural log to log10.
    """
    return value / LN10


def lex_greater_equal(rows: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """
    Lexicographic comparison of the last axis: rows >= reference.
    Both arrays broadcast against each other.
    """
    diff = np.sign(rows - reference)
    nonzero = diff != 0
    first = np.argmax(nonzero, axis=-1)
    leading = np.take_along_axis(diff, first[..., None], axis=-1)[..., 0]
    return np.where(nonzero.any(axis=-1), leading > 0, True)


def random_rows_with_ties(n: int, rows: int, seed: int) -> np.ndarray:
    """
    Uniform [0, 1) rows of length n where one coordinate of every row is
    overwritten with another, so most rows hold a duplicate value.
    """
    rng = np.random.default_rng(seed)
    values = rng.random((rows, n))
    if n > 1:
        index = np.arange(rows)
        source = rng.integers(n, size=rows)
        target = rng.integers(n, size=rows)
        values[index, target] = values[index, source]
    return values
