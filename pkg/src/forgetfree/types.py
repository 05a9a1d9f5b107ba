"""
Contains types for the package.
"""

import os
from typing import Callable, TypeAlias

import numpy as np
import numpy.typing as npt

# MARK: Arrays

Matrix: TypeAlias = npt.NDArray[np.float64]
Vector: TypeAlias = npt.NDArray[np.float64]
Labels: TypeAlias = npt.NDArray[np.int64]
ArrayLike: TypeAlias = npt.ArrayLike

# MARK: Files

PathType: TypeAlias = str | os.PathLike[str]

# MARK: Layers

BlockSpec: TypeAlias = tuple[int, int]

# MARK: Metrics

HeadBuilder: TypeAlias = Callable[[Matrix, Vector], Vector]
