"""
Contains the frozen random-weight layer stack and its tweaking procedure.

Each hidden layer is a set of node blocks with random weights drawn once and
never modified. Data is first passed through a block to get its drifted
representation, then a sparse reconstruction of the layer input from that
representation gives the tweaked weights. Their transpose adds a bounded
correction to every frozen node, so each tweaked feature stays tied to the
node it came from.
"""

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Self

import numpy as np
from scipy.special import expit

from .core import Checkpoint
from .exceptions import DivergenceError, FormatError
from .solver import L1LsProblem, SolverSettings, solve
from .types import Matrix, Vector
from .utilities.validate import (
    as_matrix,
    raise_for_nonnegative,
    raise_for_positive,
    raise_for_type,
)

logger = logging.getLogger(__name__)

# MARK: Configuration


class Activation(str, Enum):
    """Activation functions available to hidden layers."""

    TANH = "tanh"
    SIGMOID = "sigmoid"

    def __call__(self, values: np.ndarray) -> np.ndarray:
        """Applies the activation elementwise."""
        if self is Activation.TANH:
            return np.tanh(values)
        return expit(values)

    @property
    def bounds(self) -> tuple[float, float]:
        """Gets the closed range that activations can take."""
        return (-1.0, 1.0) if self is Activation.TANH else (0.0, 1.0)


@dataclass(frozen=True)
class LayerConfig:
    """Holds the shape of one hidden layer.

    The layer is made of n_blocks node blocks of block_size nodes each. A
    layer may carry its own solver settings, which take precedence over the
    settings of the stack. The tweak_radius bounds how far tweaking may move
    each node away from its frozen pre-activation, relative to the size of
    that pre-activation over the batch. A radius of zero turns tweaking off.
    """

    n_blocks: int
    block_size: int
    activation: Activation = Activation.TANH
    solver: SolverSettings | None = None
    tweak_radius: float = 0.1

    def __post_init__(self) -> None:
        """Checks the layer shape and normalizes the activation."""
        raise_for_type(self.n_blocks, int, "n_blocks")
        raise_for_type(self.block_size, int, "block_size")
        raise_for_positive(self.n_blocks, "n_blocks")
        raise_for_positive(self.block_size, "block_size")
        raise_for_type(self.tweak_radius, (int, float), "tweak_radius")
        raise_for_nonnegative(self.tweak_radius, "tweak_radius")
        try:
            activation = Activation(self.activation)
        except ValueError:
            options = ", ".join(a.value for a in Activation)
            raise ValueError(
                f"Unknown activation '{self.activation}', expected one of "
                f"{options}"
            ) from None
        object.__setattr__(self, "activation", activation)

    @property
    def width(self) -> int:
        """Gets the total number of nodes in the layer."""
        return self.n_blocks * self.block_size


@dataclass(frozen=True, eq=False)
class NodeBlock:
    """Holds the frozen random weights of one node block."""

    W: Matrix
    b: Vector

    def __post_init__(self) -> None:
        """Freezes the arrays and checks their range."""
        for name in ["W", "b"]:
            array = np.array(getattr(self, name), dtype=np.float64)
            if np.any(np.abs(array) > 1):
                raise ValueError(f"{name} entries must lie in [-1, 1]")
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ValueError(
                f"W of shape {self.W.shape} does not match b of shape "
                f"{self.b.shape}"
            )


@dataclass(frozen=True, eq=False)
class Representation:
    """Holds the activations of one layer for a batch of samples."""

    values: Matrix
    layer_index: int
    tweaked: bool = False

    def __post_init__(self) -> None:
        """Checks that the activations are finite."""
        if not np.all(np.isfinite(self.values)):
            raise ValueError(
                f"Representation of layer {self.layer_index} is not finite"
            )

    @property
    def width(self) -> int:
        """Gets the number of nodes."""
        return self.values.shape[-1]


@dataclass(frozen=True, eq=False)
class TweakWeights:
    """Holds the tweaked weights of every block in a layer.

    W has shape (n_blocks, block_size, input width) and b has shape
    (n_blocks, input width).
    """

    W: np.ndarray
    b: np.ndarray


# MARK: Stack


class RandomLayerStack(Checkpoint):
    """Represents a stack of hidden layers built from random node blocks.

    Weights come from a single stream seeded with weight_seed, drawn layer by
    layer, block by block, weights before biases. The stack never modifies
    them after construction.
    """

    FORMAT = "forgetfree.stack"

    def __init__(
        self,
        configs: Iterable[LayerConfig],
        input_dim: int,
        weight_seed: int,
        solver: SolverSettings | None = None,
    ) -> None:
        """Initializes the RandomLayerStack object."""
        configs = tuple(configs)
        if not configs:
            raise ValueError("A stack needs at least one layer")
        raise_for_type(input_dim, int, "input_dim")
        raise_for_positive(input_dim, "input_dim")
        raise_for_type(weight_seed, int, "weight_seed")
        self._configs = configs
        self._input_dim = input_dim
        self._weight_seed = weight_seed
        self._solver = solver or SolverSettings()

        # Draw every block from one stream
        rng = np.random.default_rng(weight_seed)
        layers = []
        width = input_dim
        for config in configs:
            layers.append(
                tuple(
                    NodeBlock(
                        W=rng.uniform(-1, 1, (width, config.block_size)),
                        b=rng.uniform(-1, 1, config.block_size),
                    )
                    for _ in range(config.n_blocks)
                )
            )
            width = config.width
        self._layers = tuple(layers)

        # Stacked read-only copies for batched products
        self._stacked = []
        for blocks in self._layers:
            W = np.stack([block.W for block in blocks])
            b = np.stack([block.b for block in blocks])
            W.setflags(write=False)
            b.setflags(write=False)
            self._stacked.append((W, b))

    @property
    def configs(self) -> tuple[LayerConfig, ...]:
        """Gets the layer configurations."""
        return self._configs

    @property
    def layers(self) -> tuple[tuple[NodeBlock, ...], ...]:
        """Gets the node blocks of every layer."""
        return self._layers

    @property
    def input_dim(self) -> int:
        """Gets the width of the input data."""
        return self._input_dim

    @property
    def weight_seed(self) -> int:
        """Gets the seed the weights were drawn with."""
        return self._weight_seed

    @property
    def solver(self) -> SolverSettings:
        """Gets the default solver settings."""
        return self._solver

    @property
    def output_dim(self) -> int:
        """Gets the width of the final layer."""
        return self._configs[-1].width

    def input_width(self, layer: int) -> int:
        """Gets the width of the data entering a layer."""
        if layer == 0:
            return self._input_dim
        return self._configs[layer - 1].width

    def solver_for(self, layer: int) -> SolverSettings:
        """Gets the solver settings that apply to a layer."""
        return self._configs[layer].solver or self._solver

    # MARK: Forward passes

    def _check_input(self, values: np.ndarray, layer: int) -> None:
        if not 0 <= layer < len(self._layers):
            raise IndexError(
                f"layer must lie in [0, {len(self._layers)}), got {layer}"
            )
        if values.ndim != 2 or values.shape[1] != self.input_width(layer):
            raise ValueError(
                f"Layer {layer} expects {self.input_width(layer)} columns, "
                f"got shape {values.shape}"
            )

    def drift(self, values: Matrix, layer: int) -> np.ndarray:
        """Computes every block's drifted output, stacked on the first axis."""
        self._check_input(values, layer)
        W, b = self._stacked[layer]
        activation = self._configs[layer].activation
        return activation(np.matmul(values, W) + b[:, np.newaxis, :])

    def forward_drift(
        self,
        prev: Representation,
        layer: int,
    ) -> list[Representation]:
        """Passes a representation through the random blocks of a layer."""
        drifted = self.drift(prev.values, layer)
        return [Representation(values, layer) for values in drifted]

    def fit_tweak(
        self,
        prev: Matrix,
        drifted: np.ndarray,
        layer: int,
    ) -> TweakWeights:
        """Solves for the weights reconstructing a layer input.

        Every block's drifted output, augmented with a constant column,
        becomes the design matrix of a sparse problem whose target is the
        layer input. All blocks of the layer are solved together.
        """
        n_blocks, n_samples, block_size = drifted.shape
        ones = np.ones((n_blocks, n_samples, 1))
        settings = self.solver_for(layer)
        problem = L1LsProblem(
            Z=np.concatenate([drifted, ones], axis=2),
            q=prev,
            lam=settings.lam,
            gamma=settings.gamma,
            relative=True,
        )
        try:
            state = solve(problem, settings.max_iters, settings.tol)
        except DivergenceError as error:
            raise DivergenceError(
                f"Tweaking layer {layer} block {error.index} failed: {error}",
                gamma=error.gamma,
                iteration=error.iteration,
                index=error.index,
            ) from error
        return TweakWeights(
            W=state.x[:, :block_size, :],
            b=state.x[:, block_size, :],
        )

    def apply_tweak(
        self,
        prev: Matrix,
        weights: TweakWeights,
        layer: int,
    ) -> Matrix:
        """Encodes a layer input with tweaked weights and joins the blocks.

        Each node keeps its frozen pre-activation prev @ W + b and adds the
        correction (prev - b~) @ W~^T from the tweaked weights of its block.
        Where a node's correction is larger over the batch than tweak_radius
        times its frozen pre-activation, the correction is scaled down to
        that size.
        """
        config = self._configs[layer]
        W, b = self._stacked[layer]
        frozen = np.matmul(prev, W) + b[:, np.newaxis, :]
        correction = np.matmul(
            prev - weights.b[:, np.newaxis, :],
            np.swapaxes(weights.W, 1, 2),
        )

        # Column norms over the batch, one per node
        limit = config.tweak_radius * np.linalg.norm(
            frozen, axis=1, keepdims=True
        )
        size = np.linalg.norm(correction, axis=1, keepdims=True)
        scale = np.minimum(1.0, limit / np.where(size > 0, size, 1.0))
        encoded = config.activation(frozen + scale * correction)
        return np.moveaxis(encoded, 0, 1).reshape(prev.shape[0], -1)

    def tweak(
        self,
        prev: Representation,
        drifted: list[Representation],
        layer: int,
    ) -> Representation:
        """Replaces the drifted output of a layer with its tweaked output."""
        stacked = np.stack([block.values for block in drifted])
        weights = self.fit_tweak(prev.values, stacked, layer)
        values = self.apply_tweak(prev.values, weights, layer)
        return Representation(values, layer, tweaked=True)

    def represent(self, X: Matrix) -> Representation:
        """Computes the final tweaked representation of a batch of data.

        The batch is treated as a unit: tweaked weights are fitted on it and
        used only for it. Labels are never needed.
        """
        X = as_matrix(X, "X")
        if X.shape[0] == 0:
            self._check_input(X, 0)
            return Representation(
                np.zeros((0, self.output_dim)),
                len(self._layers) - 1,
                tweaked=True,
            )
        current = Representation(X, -1, tweaked=True)
        for layer in range(len(self._layers)):
            drifted = self.forward_drift(current, layer)
            current = self.tweak(current, drifted, layer)
        return current

    def represent_batches(self, X: Matrix, batch_size: int) -> Matrix:
        """Represents data presented in consecutive batches of a fixed size."""
        raise_for_positive(batch_size, "batch_size")
        X = as_matrix(X, "X")
        if X.shape[0] == 0:
            return np.zeros((0, self.output_dim))
        return np.concatenate(
            [
                self.represent(X[start : start + batch_size]).values
                for start in range(0, X.shape[0], batch_size)
            ]
        )

    # MARK: Serialization

    def weights_digest(self) -> str:
        """Gets the SHA-256 digest of every frozen weight in drawing order."""
        digest = hashlib.sha256()
        for blocks in self._layers:
            for block in blocks:
                digest.update(block.W.tobytes())
                digest.update(block.b.tobytes())
        return digest.hexdigest()

    def _state(self, include_weights: bool = False) -> dict[str, np.ndarray]:
        """Gets the seed and layer shapes, optionally with the weights."""
        state = {
            "input_dim": np.array(self._input_dim),
            "weight_seed": np.array(self._weight_seed),
            "n_blocks": np.array([c.n_blocks for c in self._configs]),
            "block_sizes": np.array([c.block_size for c in self._configs]),
            "activations": np.array(
                [c.activation.value for c in self._configs]
            ),
            "solver": _settings_to_array(self._solver),
            "layer_solvers": np.array(
                [_settings_to_array(c.solver) for c in self._configs]
            ),
            "tweak_radii": np.array([c.tweak_radius for c in self._configs]),
        }
        if include_weights:
            state["digest"] = np.array(self.weights_digest())
            for index, blocks in enumerate(self._layers):
                for position, block in enumerate(blocks):
                    state[f"W_{index}_{position}"] = block.W
                    state[f"b_{index}_{position}"] = block.b
        return state

    @classmethod
    def _from_state(cls, state: dict[str, np.ndarray]) -> Self:
        """Rebuilds the stack from its seed and checks embedded weights."""
        configs = [
            LayerConfig(
                n_blocks=int(n),
                block_size=int(s),
                activation=Activation(str(a)),
                solver=_settings_from_array(row),
                tweak_radius=float(radius),
            )
            for n, s, a, row, radius in zip(
                state["n_blocks"],
                state["block_sizes"],
                state["activations"],
                state["layer_solvers"],
                state["tweak_radii"],
            )
        ]
        stack = cls(
            configs,
            input_dim=int(state["input_dim"]),
            weight_seed=int(state["weight_seed"]),
            solver=_settings_from_array(state["solver"]),
        )
        if "digest" in state:
            digest = hashlib.sha256()
            for index, blocks in enumerate(stack.layers):
                for position in range(len(blocks)):
                    digest.update(state[f"W_{index}_{position}"].tobytes())
                    digest.update(state[f"b_{index}_{position}"].tobytes())
            expected = str(state["digest"])
            if digest.hexdigest() != expected or (
                stack.weights_digest() != expected
            ):
                raise FormatError(
                    "Embedded weights do not match the weights drawn from "
                    f"seed {stack.weight_seed}"
                )
        return stack


def _settings_to_array(settings: SolverSettings | None) -> np.ndarray:
    """Packs solver settings into a row, NaN standing for no settings."""
    if settings is None:
        return np.full(4, np.nan)
    return np.array(
        [settings.lam, settings.gamma, settings.max_iters, settings.tol]
    )


def _settings_from_array(row: np.ndarray) -> SolverSettings | None:
    """Unpacks a row written by _settings_to_array."""
    if np.isnan(row).all():
        return None
    lam, gamma, max_iters, tol = row
    return SolverSettings(
        lam=float(lam),
        gamma=float(gamma),
        max_iters=int(max_iters),
        tol=float(tol),
    )


def init_stack(
    configs: Iterable[LayerConfig],
    input_dim: int,
    weight_seed: int,
    solver: SolverSettings | None = None,
) -> RandomLayerStack:
    """Creates a stack with weights drawn from weight_seed."""
    stack = RandomLayerStack(configs, input_dim, weight_seed, solver)
    logger.debug(
        "Initialized stack with widths %s from seed %d",
        [config.width for config in stack.configs],
        weight_seed,
    )
    return stack
