"""
Contains the single-head linear classifier trained with projected gradients.
"""

import logging
from dataclasses import dataclass
from typing import Self

import numpy as np
import scipy.linalg

from .core import Checkpoint
from .exceptions import NumericalError
from .types import Labels, Matrix
from .utilities.validate import (
    as_matrix,
    raise_for_finite,
    raise_for_nonnegative,
    raise_for_positive,
    raise_for_width,
)

logger = logging.getLogger(__name__)

# Defaults for the ridge constant, learning rate and projector regularizer
DEFAULT_MU = 2.0**-30
DEFAULT_ETA = 0.01
DEFAULT_ALPHA = 0.1
DEFAULT_EWC_MU = 100.0

# MARK: Closed form


def init_closed_form(
    V: Matrix,
    Y: Matrix,
    mu: float = DEFAULT_MU,
    fraction: float | None = None,
    size: int | None = None,
    rng: np.random.Generator | None = None,
) -> Matrix:
    """Computes ridge output weights in closed form.

    Uses (V^T V + mu I)^-1 V^T Y when there are at least as many samples as
    features, and V^T (V V^T + mu I)^-1 Y otherwise. Either a fraction of the
    rows or an explicit number of rows may be used instead of all of them;
    rows are drawn with rng when it is given and taken from the top
    otherwise.
    """

    # Validate the arguments
    V = as_matrix(V, "V")
    Y = as_matrix(Y, "Y")
    if V.shape[0] != Y.shape[0]:
        raise ValueError(
            f"V has {V.shape[0]} rows but Y has {Y.shape[0]} rows"
        )
    raise_for_nonnegative(mu, "mu")
    if fraction is not None and size is not None:
        raise ValueError("Pass either fraction or size, not both")

    # Select the rows to fit on
    count = V.shape[0]
    if fraction is not None:
        if not 0 < fraction <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
        count = max(1, int(round(fraction * V.shape[0])))
    elif size is not None:
        raise_for_positive(size, "size")
        count = min(size, V.shape[0])
    if count == 0:
        raise ValueError("Closed-form initialization needs at least one row")
    if count < V.shape[0]:
        index = (
            np.sort(rng.choice(V.shape[0], count, replace=False))
            if rng is not None
            else np.arange(count)
        )
        V, Y = V[index], Y[index]

    # Solve whichever system is smaller
    n_samples, width = V.shape
    try:
        if n_samples >= width:
            gram = V.T @ V + mu * np.eye(width)
            beta = scipy.linalg.solve(gram, V.T @ Y, assume_a="sym")
        else:
            gram = V @ V.T + mu * np.eye(n_samples)
            beta = V.T @ scipy.linalg.solve(gram, Y, assume_a="sym")
    except np.linalg.LinAlgError as error:
        raise NumericalError(
            f"Closed-form system is singular with mu={mu}"
        ) from error
    if not np.all(np.isfinite(beta)):
        raise NumericalError(f"Closed-form solution is not finite (mu={mu})")
    return beta


# MARK: Fisher state


@dataclass(frozen=True, eq=False)
class FisherState:
    """Holds the importance of each output weight and the anchor weights.

    Q is the elementwise square root of the accumulated empirical Fisher
    information, so the penalty weight of each entry is Q * Q.
    """

    Q: Matrix
    beta_anchor: Matrix

    def __post_init__(self) -> None:
        """Checks the Fisher invariants."""
        if self.Q.shape != self.beta_anchor.shape:
            raise ValueError(
                f"Q of shape {self.Q.shape} does not match the anchor of "
                f"shape {self.beta_anchor.shape}"
            )
        if np.any(self.Q < 0):
            raise ValueError("Q entries must be non-negative")

    @classmethod
    def empty(cls, beta: Matrix) -> Self:
        """Creates a state with no importance, anchored at beta."""
        return cls(Q=np.zeros_like(beta), beta_anchor=beta.copy())

    @property
    def importance(self) -> Matrix:
        """Gets the accumulated Fisher information."""
        return self.Q * self.Q


# MARK: Head


class OutputHead(Checkpoint):
    """Represents a linear head over every class seen in a task sequence.

    The head holds output weights beta and a projector P that approximately
    annihilates the representations of finished tasks. Gradient steps are
    multiplied by P, so predictions on those representations stay put. With
    orthogonal disabled, steps are plain gradient steps and P is never
    updated.
    """

    FORMAT = "forgetfree.head"
    SYMMETRIZE_EVERY = 256

    def __init__(
        self,
        beta: Matrix,
        mu: float = DEFAULT_MU,
        eta: float = DEFAULT_ETA,
        alpha: float = DEFAULT_ALPHA,
        orthogonal: bool = True,
        P: Matrix | None = None,
        tasks_seen: int = 0,
    ) -> None:
        """Initializes the OutputHead object."""
        raise_for_nonnegative(mu, "mu")
        raise_for_positive(eta, "eta")
        raise_for_positive(alpha, "alpha")
        self.beta = beta
        self._mu = mu
        self._eta = eta
        self._alpha = alpha
        self._orthogonal = orthogonal
        if P is None:
            P = np.eye(self.width)
        P = as_matrix(P, "P").copy()
        if P.shape != (self.width, self.width):
            raise ValueError(
                f"P must have shape {(self.width, self.width)}, got {P.shape}"
            )
        self._P = P
        self._tasks_seen = tasks_seen
        self._updates = 0

    @classmethod
    def zeros(cls, width: int, class_count: int, **kwargs) -> Self:
        """Creates a head with all-zero output weights."""
        return cls(np.zeros((width, class_count)), **kwargs)

    @classmethod
    def random(
        cls,
        width: int,
        class_count: int,
        seed: int,
        **kwargs,
    ) -> Self:
        """Creates a head with normal output weights of variance 1 / width."""
        rng = np.random.default_rng(seed)
        beta = rng.normal(0.0, np.sqrt(1.0 / width), (width, class_count))
        return cls(beta, **kwargs)

    @property
    def beta(self) -> Matrix:
        """Gets the output weights."""
        return self._beta

    @beta.setter
    def beta(self, value: Matrix) -> None:
        """Sets the output weights."""
        value = as_matrix(value, "beta").copy()
        raise_for_finite(value, "beta")
        if hasattr(self, "_beta") and value.shape != self._beta.shape:
            raise ValueError(
                f"beta must keep shape {self._beta.shape}, got {value.shape}"
            )
        self._beta = value

    @property
    def P(self) -> Matrix:
        """Gets the projector."""
        return self._P

    @property
    def mu(self) -> float:
        """Gets the ridge constant."""
        return self._mu

    @property
    def eta(self) -> float:
        """Gets the learning rate."""
        return self._eta

    @property
    def alpha(self) -> float:
        """Gets the projector regularizer."""
        return self._alpha

    @property
    def orthogonal(self) -> bool:
        """Determines whether steps are projected."""
        return self._orthogonal

    @property
    def tasks_seen(self) -> int:
        """Gets the number of finished tasks."""
        return self._tasks_seen

    @property
    def width(self) -> int:
        """Gets the width of the representations the head reads."""
        return self._beta.shape[0]

    @property
    def class_count(self) -> int:
        """Gets the number of output columns."""
        return self._beta.shape[1]

    # MARK: Projector

    def update_projector(self, v_row: np.ndarray) -> None:
        """Removes the direction of one representation row from P.

        Applies P <- P - (P v)(P v)^T / (alpha + v^T P v), which keeps P equal
        to alpha * (A^T A + alpha I)^-1 for the rows A seen so far.
        """
        v = np.asarray(v_row, dtype=np.float64).reshape(-1)
        raise_for_width(v, self.width, "v_row")
        Pv = self._P @ v
        denominator = self._alpha + v @ Pv
        if not denominator > 0:
            raise NumericalError(
                f"Projector update denominator is {denominator}; P is no "
                "longer positive definite"
            )
        self._P -= np.outer(Pv, Pv) / denominator

        # Rounding slowly breaks the symmetry of P
        self._updates += 1
        if self._updates % self.SYMMETRIZE_EVERY == 0:
            self._P = 0.5 * (self._P + self._P.T)
            logger.debug("Symmetrized projector after %d rows", self._updates)

    def accumulate_projector(self, V: Matrix) -> None:
        """Feeds every row of a representation matrix to update_projector."""
        for v in as_matrix(V, "V"):
            self.update_projector(v)

    # MARK: Training

    def _check_batch(self, V: Matrix, Y: Matrix) -> tuple[Matrix, Matrix]:
        V = as_matrix(V, "V_batch")
        Y = as_matrix(Y, "Y_batch")
        raise_for_width(V, self.width, "V_batch")
        raise_for_width(Y, self.class_count, "Y_batch")
        if V.shape[0] != Y.shape[0]:
            raise ValueError(
                f"V_batch has {V.shape[0]} rows but Y_batch has "
                f"{Y.shape[0]} rows"
            )
        return V, Y

    def gradient(self, V: Matrix, Y: Matrix) -> Matrix:
        """Computes the mean squared-error gradient V^T (V beta - Y) / N."""
        return V.T @ (V @ self._beta - Y) / V.shape[0]

    def sgd_step_orthogonal(self, V_batch: Matrix, Y_batch: Matrix) -> None:
        """Takes one gradient step, projected by P for an orthogonal head."""
        V, Y = self._check_batch(V_batch, Y_batch)
        if V.shape[0] == 0:
            return
        step = self.gradient(V, Y)
        if self._orthogonal:
            step = self._P @ step
        self._beta = self._beta - self._eta * step

    def sgd_step_ewc(
        self,
        fisher: FisherState,
        V_batch: Matrix,
        Y_batch: Matrix,
        penalty: float = DEFAULT_EWC_MU,
    ) -> None:
        """Takes one projected step on the loss plus a Fisher penalty.

        The penalty pulls each weight towards the anchor in proportion to
        its importance. It is evaluated at the updated weights, which turns
        the step into one small linear system per output column:
        (I + eta * penalty * P diag(f)) beta' = beta - eta * P g
        + eta * penalty * P (f * anchor).
        """
        raise_for_nonnegative(penalty, "penalty")
        if fisher.Q.shape != self._beta.shape:
            raise ValueError(
                f"Fisher state of shape {fisher.Q.shape} does not match beta "
                f"of shape {self._beta.shape}"
            )
        if penalty == 0 or not np.any(fisher.Q):
            self.sgd_step_orthogonal(V_batch, Y_batch)
            return
        V, Y = self._check_batch(V_batch, Y_batch)
        if V.shape[0] == 0:
            return

        # One system per column, sharing the projector
        P = self._P if self._orthogonal else np.eye(self.width)
        weight = self._eta * penalty * fisher.importance.T
        systems = np.eye(self.width) + P[np.newaxis] * weight[:, np.newaxis]
        pull = (weight * fisher.beta_anchor.T) @ P.T
        right = (self._beta - self._eta * P @ self.gradient(V, Y)).T + pull
        try:
            solved = np.linalg.solve(systems, right[..., np.newaxis])
        except np.linalg.LinAlgError as error:
            raise NumericalError("Penalized step is singular") from error
        self._beta = solved[..., 0].T

    def finish_task(
        self,
        V_task: Matrix,
        Y_task: Matrix,
        fisher: FisherState | None = None,
    ) -> FisherState | None:
        """Closes a task: updates P, accumulates Fisher and counts the task.

        Returns the new Fisher state when one is given, anchored at the
        current weights.
        """
        V, Y = self._check_batch(V_task, Y_task)
        self._tasks_seen += 1
        if V.shape[0] == 0:
            return fisher
        if self._orthogonal:
            self.accumulate_projector(V)
        if fisher is None:
            return None

        # Mean of squared per-sample gradients v_i * r_j
        residual = V @ self._beta - Y
        information = (V * V).T @ (residual * residual) / V.shape[0]
        return FisherState(
            Q=np.sqrt(fisher.importance + information),
            beta_anchor=self._beta.copy(),
        )

    # MARK: Inference

    def scores(self, V: Matrix) -> Matrix:
        """Computes the raw output V beta."""
        V = as_matrix(V, "V")
        raise_for_width(V, self.width, "V")
        return V @ self._beta

    def predict(self, V: Matrix) -> Labels:
        """Predicts the class of each row, ties going to the lowest index."""
        return self.scores(V).argmax(axis=1)

    def loss(self, V: Matrix, Y: Matrix) -> float:
        """Computes the squared error per sample, averaged over samples."""
        V, Y = self._check_batch(V, Y)
        if V.shape[0] == 0:
            return 0.0
        return float(np.mean(np.sum((V @ self._beta - Y) ** 2, axis=1)))

    def accuracy(self, V: Matrix, Y: Matrix) -> float:
        """Computes the fraction of rows whose predicted class is correct."""
        V, Y = self._check_batch(V, Y)
        if V.shape[0] == 0:
            return float("nan")
        return float(np.mean(self.predict(V) == Y.argmax(axis=1)))

    # MARK: Serialization

    def _state(self) -> dict[str, np.ndarray]:
        """Gets the weights, projector, counters and hyperparameters."""
        return {
            "beta": self._beta,
            "P": self._P,
            "hyperparameters": np.array([self._mu, self._eta, self._alpha]),
            "counters": np.array([self._tasks_seen, self._updates]),
            "orthogonal": np.array(self._orthogonal),
        }

    @classmethod
    def _from_state(cls, state: dict[str, np.ndarray]) -> Self:
        """Rebuilds a head from its saved arrays."""
        mu, eta, alpha = (float(v) for v in state["hyperparameters"])
        tasks_seen, updates = (int(v) for v in state["counters"])
        head = cls(
            state["beta"],
            mu=mu,
            eta=eta,
            alpha=alpha,
            orthogonal=bool(state["orthogonal"]),
            P=state["P"],
            tasks_seen=tasks_seen,
        )
        head._updates = updates
        return head
