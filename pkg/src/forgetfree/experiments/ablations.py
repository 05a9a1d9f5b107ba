"""
Contains the ablation drivers for node blocks, head initialization and
generalization complexity.
"""

import dataclasses
import logging
from typing import Sequence

import numpy as np

from ..data import Dataset
from ..metrics import rademacher_estimate, ridge_head_builder
from ..representation import init_stack
from ..types import BlockSpec
from ..utilities.optional import requires_modules
from .config import ExperimentConfig
from .runner import load_datasets, run_experiment, split_tasks

# Import optional dependencies
try:
    import pandas as pd
except ImportError:
    pass

logger = logging.getLogger(__name__)

# Node-block shapes sharing a layer width of 100
DEFAULT_GRID: tuple[BlockSpec, ...] = (
    (1, 100),
    (4, 25),
    (10, 10),
    (25, 4),
    (50, 2),
    (100, 1),
)
DEFAULT_EPOCHS: tuple[int, ...] = (1, 5, 10)
DEFAULT_INIT_SIZES: tuple[int, ...] = (1000, 2500, 5000)

# MARK: Node blocks


@requires_modules("pandas")
def run_ablation_node_blocks(
    config: ExperimentConfig,
    grid: Sequence[BlockSpec] = DEFAULT_GRID,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> "pd.DataFrame":
    """Compares node-block shapes of equal layer width.

    The first hidden layer takes the shape (n_blocks, block_size) of the grid
    entry while deeper layers keep their configured shapes. Rows are sorted
    by mean ACC, best first.
    """
    if not grid:
        raise ValueError("The node-block grid is empty")
    widths = {n_blocks * block_size for n_blocks, block_size in grid}
    if len(widths) != 1:
        raise ValueError(
            "Node-block grid entries must share one layer width, got "
            f"{sorted(widths)}"
        )
    datasets = datasets or load_datasets(config)

    rows = []
    for n_blocks, block_size in grid:
        results = run_experiment(
            with_first_layer(config, n_blocks, block_size), datasets
        )
        scores = np.array([result.acc for result in results])
        rows.append(
            {
                "n_blocks": n_blocks,
                "block_size": block_size,
                "acc_mean": float(scores.mean()),
                "acc_std": float(scores.std()),
                "bwt_mean": _mean([result.bwt for result in results]),
                "runs": len(results),
            }
        )
        logger.info(
            "Node blocks (%d, %d): ACC %.4f",
            n_blocks,
            block_size,
            rows[-1]["acc_mean"],
        )
    df = pd.DataFrame(rows)
    df = df.sort_values("acc_mean", ascending=False, kind="stable")
    return df.reset_index(drop=True)


def with_first_layer(
    config: ExperimentConfig,
    n_blocks: int,
    block_size: int,
) -> ExperimentConfig:
    """Reshapes the node blocks of the first hidden layer only."""
    first, *deeper = config.layers
    first = dataclasses.replace(
        first, n_blocks=n_blocks, block_size=block_size
    )
    return dataclasses.replace(config, layers=(first, *deeper))


def _mean(values: list[float | None]) -> float | None:
    present = [value for value in values if value is not None]
    return float(np.mean(present)) if present else None


# MARK: Initialization


@requires_modules("pandas")
def run_ablation_init(
    config: ExperimentConfig,
    datasets: tuple[Dataset, Dataset] | None = None,
    epochs: Sequence[int] = DEFAULT_EPOCHS,
    sizes: Sequence[int] = DEFAULT_INIT_SIZES,
    random_eta: float = 0.02,
    analytic_eta: float = 0.0002,
) -> "pd.DataFrame":
    """Compares random and closed-form initialization of the first task.

    Each setting is trained for every epoch count in epochs. The table
    reports the first task's training loss and test accuracy and the final
    ACC, averaged over runs.
    """
    datasets = datasets or load_datasets(config)
    random_head = dataclasses.replace(
        config.head, init="random", eta=random_eta
    )
    settings = [("random", random_head)]
    for size in sizes:
        head = dataclasses.replace(
            config.head,
            init="analytic",
            init_samples=size,
            eta=analytic_eta,
        )
        settings.append((f"analytic-{size}", head))

    rows = []
    for label, head in settings:
        for count in epochs:
            trial = dataclasses.replace(
                config,
                head=dataclasses.replace(head, epochs=count),
                independent=False,
            )
            results = run_experiment(trial, datasets)
            rows.append(
                {
                    "init": label,
                    "epochs": count,
                    "first_task_loss": float(
                        np.mean([r.first_task_loss for r in results])
                    ),
                    "first_task_accuracy": float(
                        np.mean([r.first_task_accuracy for r in results])
                    ),
                    "acc": float(np.mean([r.acc for r in results])),
                }
            )
            logger.info("Init %s, %d epoch(s): %s", label, count, rows[-1])
    return pd.DataFrame(rows)


# MARK: Complexity


@requires_modules("pandas")
def run_rademacher_curve(
    config: ExperimentConfig,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> "pd.DataFrame":
    """Estimates the accumulated complexity term after each session.

    Each task contributes the estimate on up to rademacher_samples of its
    training representations; the accumulated value of a session sums the
    contributions of every task learned so far.
    """
    train, test = datasets or load_datasets(config)
    builder = ridge_head_builder(mu=config.rademacher_mu)

    rows = []
    for run in range(config.runs):
        sequence = split_tasks(config, train, test, run)
        stack = init_stack(
            config.layers,
            train.input_dim,
            config.seeds.weight_seed,
            config.solver,
        )
        V_tasks = [
            stack.represent_batches(
                task.X_train[: config.rademacher_samples],
                config.present_size,
            )
            for task in sequence
        ]
        estimate = rademacher_estimate(
            builder,
            V_tasks,
            num_draws=config.rademacher_draws,
            label_seed=config.seeds.label_seed + run,
        )
        for session, (value, total) in enumerate(
            zip(estimate.per_task_values, estimate.accumulated)
        ):
            rows.append(
                {
                    "run": run,
                    "session": session + 1,
                    "task_value": value,
                    "accumulated": total,
                }
            )
    return pd.DataFrame(
        rows, columns=["run", "session", "task_value", "accumulated"]
    )