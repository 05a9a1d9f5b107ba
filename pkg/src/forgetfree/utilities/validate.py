"""
Contains validation-related code for the package.
"""

from typing import Any, Type

import numpy as np

from ..types import Matrix

# MARK: Types and conversions


def types_to_tuple(value: Any) -> tuple[Any, ...]:
    """Converts a value for expected types to a tuple if necessary."""
    if isinstance(value, tuple):
        return value
    elif isinstance(value, list):
        return tuple(value)
    elif not isinstance(value, Type):
        instance_type = type(value).__name__
        raise TypeError(f"Expected a type, got instance of {instance_type}")
    return (value,)


def raise_for_type(
    value: Any,
    expected_types: Type | list[Type] | tuple[Type, ...],
    name: str = "value",
) -> None:
    """Raises a TypeError if the input is not of the expected type.

    Booleans are rejected where numbers are expected, since a stray `true`
    in a config file should not silently become 1.
    """
    expected_types = types_to_tuple(expected_types)
    if isinstance(value, bool) and bool not in expected_types:
        valid = False
    else:
        valid = isinstance(value, expected_types)
    if not valid:
        type_names = ", ".join(t.__name__ for t in expected_types)
        raise TypeError(
            f"{name} got {type(value).__name__}, expected one of "
            f"({type_names})"
        )


# MARK: Scalars


def raise_for_positive(value: float, name: str) -> None:
    """Raises a ValueError if the value is not strictly positive."""
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")


def raise_for_nonnegative(value: float, name: str) -> None:
    """Raises a ValueError if the value is negative."""
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")


def raise_for_fraction(value: float, name: str) -> None:
    """Raises a ValueError if the value is not in the open interval (0, 1)."""
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


# MARK: Arrays


def as_matrix(value: Any, name: str, ndim: int = 2) -> Matrix:
    """Converts the input to a float64 array with the given number of axes."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(
            f"{name} must have {ndim} dimension(s), got shape {array.shape}"
        )
    return array


def raise_for_finite(array: np.ndarray, name: str) -> None:
    """Raises a ValueError if the array holds NaN or infinite entries."""
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite entries")


def raise_for_width(array: np.ndarray, width: int, name: str) -> None:
    """Raises a ValueError if the last axis does not have the given size."""
    if array.shape[-1] != width:
        raise ValueError(
            f"{name} must have {width} columns, got {array.shape[-1]}"
        )
