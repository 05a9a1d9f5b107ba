"""
Contains the projection-network solver for L1-regularized least squares.

The solver minimizes 0.5 * ||Z x - q||^2 + lam * ||x||_1 by iterating a
state x and an auxiliary output y that converges to a subgradient of the L1
norm at x. Stacks of problems that share nothing but their shapes are solved
together along leading axes, and a matrix target is solved column by column
with a shared design matrix.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DivergenceError
from .types import ArrayLike, Matrix
from .utilities.validate import (
    raise_for_finite,
    raise_for_positive,
    raise_for_type,
)

logger = logging.getLogger(__name__)

# MARK: Domain types


@dataclass(frozen=True)
class ClampBounds:
    """Holds the box that the projection operator clamps into."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        """Checks that the box is not empty."""
        if not self.lo < self.hi:
            raise ValueError(
                f"lo must be below hi, got lo={self.lo} and hi={self.hi}"
            )


@dataclass(frozen=True)
class SolverSettings:
    """Holds the hyperparameters for building and solving problems."""

    lam: float = 0.01
    gamma: float = 0.4
    max_iters: int = 500
    tol: float = 1e-5

    def __post_init__(self) -> None:
        """Checks the settings."""
        raise_for_type(self.max_iters, int, "max_iters")
        for name in ["lam", "gamma", "max_iters", "tol"]:
            raise_for_positive(getattr(self, name), name)


@dataclass(frozen=True, eq=False)
class L1LsProblem:
    """Holds one problem, or a stack of problems, to be solved.

    Z has shape (..., N, n). A one-dimensional q of length N is a single
    target vector; otherwise q has shape (..., N, k) and must broadcast
    against Z's leading axes. When relative is set, the L1 weight of each
    problem is lam times the squared spectral norm of its Z, so that lam
    acts on the normalized problem.
    """

    Z: Matrix
    q: Matrix
    lam: float = 0.01
    gamma: float = 0.4
    relative: bool = False

    def __post_init__(self) -> None:
        """Standardizes the arrays and checks the problem invariants."""
        Z = np.asarray(self.Z, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64)
        if Z.ndim < 2:
            raise ValueError(f"Z must have at least 2 axes, got {Z.shape}")
        if q.ndim == 0:
            raise ValueError("q must be a vector or a matrix")
        rows = q.shape[0] if q.ndim == 1 else q.shape[-2]
        if rows != Z.shape[-2]:
            raise ValueError(
                f"Z has {Z.shape[-2]} rows but q has {rows} rows"
            )
        raise_for_positive(self.lam, "lam")
        raise_for_positive(self.gamma, "gamma")
        raise_for_finite(Z, "Z")
        raise_for_finite(q, "q")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "q", q)

    @property
    def is_vector(self) -> bool:
        """Determines whether the target is a single vector."""
        return self.q.ndim == 1

    @property
    def target(self) -> Matrix:
        """Gets the target with an explicit column axis."""
        return self.q[:, np.newaxis] if self.is_vector else self.q

    def normal_equations(self) -> tuple[Matrix, Matrix]:
        """Gets the Gram matrix Z^T Z and the right-hand side Z^T q."""
        Zt = np.swapaxes(self.Z, -1, -2)
        return Zt @ self.Z, Zt @ self.target

    def weight(self, gram: Matrix | None = None) -> Matrix:
        """Gets the effective L1 weight, broadcastable over the stack."""
        if not self.relative:
            return np.full(self.Z.shape[:-2] + (1, 1), self.lam)
        if gram is None:
            gram, _ = self.normal_equations()
        return self.lam * spectral_norm2(gram)


@dataclass(frozen=True, eq=False)
class SolverState:
    """Holds the solver state after the last iteration."""

    x: Matrix
    y: Matrix
    iteration: int
    residual: float
    converged: bool


# MARK: Operations


def spectral_norm2(gram: Matrix) -> Matrix:
    """Gets the largest eigenvalue of each Gram matrix, keeping two axes."""
    return np.linalg.eigvalsh(gram)[..., -1:, np.newaxis]


def _clamp(u: np.ndarray, bounds: ClampBounds) -> np.ndarray:
    return np.clip(u, bounds.lo, bounds.hi)


def project_g(u: ArrayLike, bounds: ClampBounds | None = None) -> np.ndarray:
    """Clamps every entry of the input into the bounds."""
    bounds = bounds or ClampBounds()
    u = np.asarray(u, dtype=np.float64)
    raise_for_finite(u, "u")
    return _clamp(u, bounds)


def objective(problem: L1LsProblem, x: ArrayLike) -> float:
    """Evaluates 0.5 * ||Z x - q||^2 + lam * ||x||_1 summed over the stack."""
    x = np.asarray(x, dtype=np.float64)
    if problem.is_vector:
        x = x[:, np.newaxis]
    residual = problem.Z @ x - problem.target
    weight = problem.weight()
    penalty = weight * np.abs(x).sum(axis=(-2, -1), keepdims=True)
    return float(0.5 * np.sum(residual**2) + np.sum(penalty))


def solve(
    problem: L1LsProblem,
    max_iters: int = 500,
    tol: float = 1e-5,
    *,
    bounds: ClampBounds | None = None,
    ceiling: float = 1e6,
    patience: int = 50,
) -> SolverState:
    """Runs the projection iteration until the state is stationary.

    Each step is x <- x - s * (Z^T (Z x - q) + lam * g(y + x)) followed by
    y <- g(y + x), where g clamps into the bounds and the step size is
    s = gamma / (||Z||^2 + lam). Before every step the state is tested with
    the residuals of check_optimality, and iteration stops once both are
    within tol or after max_iters steps. A converged state therefore passes
    check_optimality at the same tol. A DivergenceError is raised if
    x becomes non-finite, or if the change of x stays above ceiling while
    growing for patience consecutive steps.
    """
    raise_for_type(max_iters, int, "max_iters")
    raise_for_positive(max_iters, "max_iters")
    raise_for_positive(tol, "tol")
    bounds = bounds or ClampBounds()

    # Precompute the normal equations and the step size
    gram, rhs = problem.normal_equations()
    norm2 = spectral_norm2(gram)
    lam = problem.weight(gram)
    scale = norm2 + lam
    step = problem.gamma / np.where(scale > 0, scale, 1.0)
    batch_shape = rhs.shape[:-2]

    # Iterate from a cold start
    x = np.zeros_like(rhs)
    y = np.zeros_like(rhs)
    previous, growing = np.inf, 0
    converged = False
    iteration = 0
    while True:
        gradient = gram @ x - rhs
        residual = _optimality_residual(gradient, x, y, lam, bounds)
        if residual <= tol:
            converged = True
            break
        if iteration == max_iters:
            break
        iteration += 1
        x_next = x - step * (gradient + lam * _clamp(y + x, bounds))
        y = _clamp(y + x_next, bounds)
        change = np.abs(x_next - x).reshape(batch_shape + (-1,))
        x = x_next

        # Catch a blow-up before the next residual is formed
        per_problem = change.max(axis=-1, initial=0.0)
        largest = float(np.max(per_problem))
        if not np.isfinite(largest):
            raise _diverged(problem, iteration, per_problem)
        if largest > ceiling and largest > previous:
            growing += 1
        else:
            growing = 0
        if growing >= patience:
            raise _diverged(problem, iteration, per_problem)
        previous = largest

    logger.debug(
        "Solver stopped after %d iterations (residual %.3g, converged %s)",
        iteration,
        residual,
        converged,
    )
    if problem.is_vector:
        x, y = x[:, 0], y[:, 0]
    return SolverState(
        x=x,
        y=y,
        iteration=iteration,
        residual=residual,
        converged=converged,
    )


def _optimality_residual(
    gradient: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    lam: np.ndarray | float,
    bounds: ClampBounds,
) -> float:
    """Gets the larger of the stationarity and fixed-point residuals."""
    stationarity = np.max(np.abs(gradient + lam * y), initial=0.0)
    fixed_point = np.max(np.abs(y - _clamp(y + x, bounds)), initial=0.0)
    return float(max(stationarity, fixed_point))


def _diverged(
    problem: L1LsProblem,
    iteration: int,
    per_problem: np.ndarray,
) -> DivergenceError:
    """Builds the error raised when the iteration runs away."""
    index = None
    if per_problem.ndim:
        # Non-finite entries rank above every finite change
        ranked = np.where(np.isfinite(per_problem), per_problem, np.inf)
        index = int(np.argmax(ranked.ravel()))
    return DivergenceError(
        f"Solver diverged at iteration {iteration}; the gain "
        f"gamma={problem.gamma} is likely too large",
        gamma=problem.gamma,
        iteration=iteration,
        index=index,
    )


def check_optimality(
    problem: L1LsProblem,
    state: SolverState,
    tol: float = 1e-5,
    *,
    bounds: ClampBounds | None = None,
) -> bool:
    """Determines whether a state satisfies the stationarity conditions.

    Both Z^T (Z x - q) + lam * y and y - g(y + x) must vanish within tol in
    the max norm, with g clamping into the bounds.
    """
    x, y = state.x, state.y
    if problem.is_vector:
        x, y = x[:, np.newaxis], y[:, np.newaxis]
    gram, rhs = problem.normal_equations()
    lam = problem.weight(gram)
    residual = _optimality_residual(
        gram @ x - rhs, x, y, lam, bounds or ClampBounds()
    )
    return residual <= tol
