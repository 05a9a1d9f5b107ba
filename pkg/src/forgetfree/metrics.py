"""
Contains code for continual-learning metrics and complexity estimates.
"""

from dataclasses import dataclass
from typing import Iterable, Self, Sequence

import numpy as np

from .head import init_closed_form
from .types import HeadBuilder, Matrix, Vector
from .utilities.optional import requires_modules
from .utilities.validate import as_matrix, raise_for_positive

# Import optional dependencies
try:
    import pandas as pd
except ImportError:
    pass

# MARK: Accuracy matrix


class AccuracyMatrix:
    """Records test accuracies over a sequence of training sessions.

    Entry (i, j) is the accuracy on task j after training on task i. Entries
    that were never recorded are NaN. Accuracies of independently trained
    models, one per task, are kept alongside.
    """

    def __init__(self, num_tasks: int) -> None:
        """Initializes the AccuracyMatrix object."""
        if num_tasks < 0:
            raise ValueError(
                f"num_tasks must be non-negative, got {num_tasks}"
            )
        self._values = np.full((num_tasks, num_tasks), np.nan)
        self._independent = np.full(num_tasks, np.nan)

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[float | None]],
        independent: Sequence[float | None] | None = None,
    ) -> Self:
        """Creates a matrix from rows, where None or missing entries are unset.

        Row i may hold anywhere from zero to num_tasks entries.
        """
        matrix = cls(len(rows))
        for trained, row in enumerate(rows):
            for evaluated, accuracy in enumerate(row):
                if accuracy is not None:
                    matrix.record(trained, evaluated, accuracy)
        for task, accuracy in enumerate(independent or []):
            if accuracy is not None:
                matrix.record_independent(task, accuracy)
        return matrix

    @property
    def num_tasks(self) -> int:
        """Gets the number of tasks."""
        return self._values.shape[0]

    @property
    def values(self) -> Matrix:
        """Gets a copy of the accuracy entries."""
        return self._values.copy()

    @property
    def independent(self) -> Vector:
        """Gets a copy of the independent-model accuracies."""
        return self._independent.copy()

    def _check_task(self, index: int, name: str) -> None:
        if not 0 <= index < self.num_tasks:
            raise IndexError(
                f"{name} must lie in [0, {self.num_tasks}), got {index}"
            )

    @staticmethod
    def _check_accuracy(accuracy: float) -> None:
        if not 0 <= accuracy <= 1:
            raise ValueError(f"Accuracy must lie in [0, 1], got {accuracy}")

    def record(self, trained: int, evaluated: int, accuracy: float) -> None:
        """Records the accuracy on one task after one training session."""
        self._check_task(trained, "trained")
        self._check_task(evaluated, "evaluated")
        self._check_accuracy(accuracy)
        self._values[trained, evaluated] = accuracy

    def record_independent(self, task: int, accuracy: float) -> None:
        """Records the accuracy of a model trained on one task alone."""
        self._check_task(task, "task")
        self._check_accuracy(accuracy)
        self._independent[task] = accuracy

    def is_complete(self) -> bool:
        """Determines whether the lower triangle and diagonal are recorded."""
        rows, cols = np.tril_indices(self.num_tasks)
        return bool(np.all(np.isfinite(self._values[rows, cols])))

    def rows(self) -> list[list[float | None]]:
        """Gets the entries as nested lists with None for unset entries."""
        return [
            [None if np.isnan(v) else float(v) for v in row]
            for row in self._values
        ]

    @requires_modules("pandas")
    def to_dataframe(self) -> "pd.DataFrame":
        """Converts the matrix to a dataframe labelled by task number."""
        labels = [f"task_{t + 1}" for t in range(self.num_tasks)]
        df = pd.DataFrame(self._values, index=labels, columns=labels)
        df.index.name = "trained"
        return df


# MARK: Transfer metrics


def _require(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"Accuracy matrix is missing {what}")


def acc(matrix: AccuracyMatrix) -> float:
    """Computes the mean accuracy over all tasks after the last session."""
    if matrix.num_tasks == 0:
        raise ValueError("acc needs at least one task")
    final = matrix.values[-1]
    _require(final, "entries in the final row")
    return float(np.mean(final))


def bwt(matrix: AccuracyMatrix) -> float:
    """Computes the mean change in accuracy on old tasks since learned."""
    if matrix.num_tasks < 2:
        raise ValueError(
            f"bwt needs at least two tasks, got {matrix.num_tasks}"
        )
    values = matrix.values
    final = values[-1, :-1]
    learned = np.diag(values)[:-1]
    _require(final, "entries in the final row")
    _require(learned, "diagonal entries")
    return float(np.mean(final - learned))


def fwt(matrix: AccuracyMatrix) -> float:
    """Computes the mean gain over independent models on each new task."""
    if matrix.num_tasks < 2:
        raise ValueError(
            f"fwt needs at least two tasks, got {matrix.num_tasks}"
        )
    learned = np.diag(matrix.values)[1:]
    independent = matrix.independent[1:]
    _require(learned, "diagonal entries")
    _require(independent, "independent-model accuracies")
    return float(np.mean(learned - independent))


# MARK: Rademacher complexity


@dataclass(frozen=True)
class RademacherEstimate:
    """Holds the estimated complexity term of each task."""

    per_task_values: tuple[float, ...]
    num_draws: int
    label_seed: int

    def __post_init__(self) -> None:
        """Checks that every value is non-negative."""
        if any(value < 0 for value in self.per_task_values):
            raise ValueError("Rademacher values must be non-negative")

    @property
    def accumulated(self) -> tuple[float, ...]:
        """Gets the running total over tasks, one entry per session."""
        return tuple(float(v) for v in np.cumsum(self.per_task_values))

    @property
    def total(self) -> float:
        """Gets the sum over all tasks."""
        return float(sum(self.per_task_values))


def ridge_head_builder(mu: float = 1.0) -> HeadBuilder:
    """Creates a builder fitting a ridge output weight to random signs."""

    def build(V: Matrix, signs: Vector) -> Vector:
        return init_closed_form(V, signs[:, np.newaxis], mu=mu)[:, 0]

    return build


def rademacher_estimate(
    head_builder: HeadBuilder,
    V_tasks: Iterable[Matrix],
    num_draws: int,
    label_seed: int,
) -> RademacherEstimate:
    """Estimates the empirical Rademacher complexity of each task.

    For every draw, random signs are fitted by head_builder on the task's
    representations and the absolute correlation between the fitted outputs
    and the signs is recorded. Values are averaged over draws. Signs for all
    tasks come from one stream in task order, so appending tasks leaves the
    values of earlier tasks unchanged.
    """
    raise_for_positive(num_draws, "num_draws")
    rng = np.random.default_rng(label_seed)
    values = []
    for index, V in enumerate(V_tasks):
        V = as_matrix(V, f"V_tasks[{index}]")
        if V.shape[0] == 0:
            raise ValueError(f"V_tasks[{index}] has no rows")
        total = 0.0
        for _ in range(num_draws):
            signs = (rng.integers(0, 2, V.shape[0]) * 2 - 1).astype(float)
            outputs = V @ head_builder(V, signs)
            total += abs(float(np.mean(outputs * signs)))
        values.append(total / num_draws)
    return RademacherEstimate(
        per_task_values=tuple(values),
        num_draws=num_draws,
        label_seed=label_seed,
    )
