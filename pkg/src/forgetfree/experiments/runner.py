"""
Contains code for running seeded class-incremental experiments.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Self

import numpy as np

from ..data import Dataset, TaskSequence, load_benchmark, split_cil
from ..exceptions import ForgetFreeError, RunError
from ..head import FisherState, OutputHead, init_closed_form
from ..metrics import AccuracyMatrix, acc, bwt, fwt
from ..representation import RandomLayerStack, init_stack
from ..types import Matrix
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

# MARK: Results


@dataclass(eq=False)
class RunResult:
    """Holds the outcome of one run of an experiment."""

    run: int
    variant: str
    seeds: dict[str, int]
    accuracy: AccuracyMatrix
    acc: float
    bwt: float | None
    fwt: float | None
    task_seconds: list[float]
    first_task_loss: float
    first_task_accuracy: float
    frozen_weights_intact: bool
    class_order: list[int]
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Converts the result to JSON-compatible data."""
        return {
            "run": self.run,
            "variant": self.variant,
            "seeds": dict(self.seeds),
            "R": self.accuracy.rows(),
            "R_ind": [
                None if np.isnan(v) else float(v)
                for v in self.accuracy.independent
            ],
            "acc": self.acc,
            "bwt": self.bwt,
            "fwt": self.fwt,
            "task_seconds": list(self.task_seconds),
            "first_task_loss": self.first_task_loss,
            "first_task_accuracy": self.first_task_accuracy,
            "frozen_weights_intact": self.frozen_weights_intact,
            "class_order": list(self.class_order),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        """Creates a result from data produced by to_dict."""
        return cls(
            run=data["run"],
            variant=data["variant"],
            seeds=dict(data["seeds"]),
            accuracy=AccuracyMatrix.from_rows(data["R"], data["R_ind"]),
            acc=data["acc"],
            bwt=data["bwt"],
            fwt=data["fwt"],
            task_seconds=list(data["task_seconds"]),
            first_task_loss=data["first_task_loss"],
            first_task_accuracy=data["first_task_accuracy"],
            frozen_weights_intact=data["frozen_weights_intact"],
            class_order=list(data["class_order"]),
            config=data.get("config", {}),
        )


# MARK: Data


def load_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Loads the train and test datasets named in the configuration."""
    if config.dataset.directory is None:
        raise ValueError(
            "No dataset directory configured; set dataset.directory or pass "
            "--dataset-dir"
        )
    return load_benchmark(
        config.dataset.kind,
        config.dataset.directory,
        class_count=config.dataset.class_count,
    )


def split_tasks(
    config: ExperimentConfig,
    train: Dataset,
    test: Dataset,
    run: int,
) -> TaskSequence:
    """Splits the data into tasks using the class ordering of a run."""
    sequence = split_cil(
        train,
        config.num_tasks,
        ordering_seed=config.seeds.ordering_seed + run,
        test_fraction=config.test_fraction,
        test_data=None if config.dataset.holdout else test,
    )
    for index, task in enumerate(sequence):
        if task.X_test.shape[0] == 0 or task.n_samples == 0:
            raise ValueError(f"Task {index} has an empty train or test split")
    return sequence


# MARK: Training


def new_head(
    config: ExperimentConfig,
    width: int,
    class_count: int,
    run: int,
) -> OutputHead:
    """Creates the untrained head of a run."""
    options = {
        "mu": config.head.mu,
        "eta": config.head.eta,
        "alpha": config.head.alpha,
        "orthogonal": config.orthogonal,
    }
    if config.head.init == "random":
        seed = config.seeds.weight_seed + run
        return OutputHead.random(width, class_count, seed, **options)
    return OutputHead.zeros(width, class_count, **options)


def train_task(
    config: ExperimentConfig,
    head: OutputHead,
    V: Matrix,
    Y: Matrix,
    rng: np.random.Generator,
    fisher: FisherState | None = None,
) -> None:
    """Trains the head on one task with shuffled minibatch epochs.

    The first task of an analytically initialized head starts from the
    closed-form solution. The joint baseline refits that solution on all
    the data it is given at every task. Steps carry the Fisher penalty once
    a task has been finished and a Fisher state is given.
    """
    refit = head.tasks_seen == 0 or config.variant == "joint"
    if refit and config.head.init == "analytic":
        if config.head.init_samples is not None:
            sizing = {"size": config.head.init_samples}
        else:
            sizing = {"fraction": config.head.init_fraction}
        head.beta = init_closed_form(V, Y, config.head.mu, rng=rng, **sizing)

    batch_size = config.head.batch_size
    for _ in range(config.head.epochs):
        order = rng.permutation(V.shape[0])
        for start in range(0, V.shape[0], batch_size):
            index = order[start : start + batch_size]
            if fisher is not None and head.tasks_seen > 0:
                head.sgd_step_ewc(
                    fisher, V[index], Y[index], penalty=config.head.ewc_mu
                )
            else:
                head.sgd_step_orthogonal(V[index], Y[index])


def independent_accuracy(
    config: ExperimentConfig,
    sequence: TaskSequence,
    input_dim: int,
    run: int,
    task: int,
) -> float:
    """Trains a fresh model on a single task and gets its test accuracy."""
    seed_rng = np.random.default_rng([config.seeds.weight_seed, run, task])
    stack = init_stack(
        config.layers,
        input_dim,
        int(seed_rng.integers(2**31)),
        config.solver,
    )
    current = sequence[task]
    V_train = stack.represent_batches(current.X_train, config.present_size)
    V_test = stack.represent_batches(current.X_test, config.present_size)
    head = OutputHead(
        init_closed_form(V_train, current.Y_train, config.head.mu),
        orthogonal=False,
    )
    return head.accuracy(V_test, current.Y_test)


def _run_once(
    config: ExperimentConfig,
    train: Dataset,
    test: Dataset,
    run: int,
) -> RunResult:
    """Runs one repetition of an experiment."""
    logger.info(
        "Starting run %d (%s), ordering seed %d",
        run,
        config.variant,
        config.seeds.ordering_seed + run,
    )
    sequence = split_tasks(config, train, test, run)
    stack: RandomLayerStack = init_stack(
        config.layers, train.input_dim, config.seeds.weight_seed, config.solver
    )
    digest = stack.weights_digest()

    # Every batch is represented once and reused by all epochs
    present = config.present_size
    train_reps = [
        stack.represent_batches(task.X_train, present) for task in sequence
    ]
    test_reps = [
        stack.represent_batches(task.X_test, present) for task in sequence
    ]

    head = new_head(config, stack.output_dim, sequence.class_count, run)
    fisher = None
    if config.variant == "if2net-ewc":
        fisher = FisherState.empty(head.beta)
    matrix = AccuracyMatrix(len(sequence))
    task_seconds = []
    first_task_loss = first_task_accuracy = float("nan")

    for index, task in enumerate(sequence):
        started = time.perf_counter()
        rng = np.random.default_rng([config.seeds.shuffle_seed, run, index])
        if config.variant == "joint":
            V = np.concatenate(train_reps[: index + 1])
            Y = sequence.cumulative_train(index)[1]
        else:
            V, Y = train_reps[index], task.Y_train
        train_task(config, head, V, Y, rng, fisher)
        if index == 0:
            first_task_loss = head.loss(V, Y)
            first_task_accuracy = head.accuracy(test_reps[0], task.Y_test)
        fisher = head.finish_task(train_reps[index], task.Y_train, fisher)
        task_seconds.append(time.perf_counter() - started)

        # Evaluate every task, including ones not yet trained
        for evaluated, other in enumerate(sequence):
            accuracy = head.accuracy(test_reps[evaluated], other.Y_test)
            matrix.record(index, evaluated, accuracy)
        logger.info(
            "Run %d task %d: accuracy %.4f in %.2fs",
            run,
            index,
            matrix.values[index, index],
            task_seconds[-1],
        )

    # Independent single-task models for forward transfer
    if config.independent and len(sequence) > 1:
        for index in range(len(sequence)):
            matrix.record_independent(
                index,
                independent_accuracy(
                    config, sequence, train.input_dim, run, index
                ),
            )

    seeds = config.seeds
    return RunResult(
        run=run,
        variant=config.variant,
        seeds={
            "weight_seed": seeds.weight_seed,
            "ordering_seed": seeds.ordering_seed + run,
            "shuffle_seed": seeds.shuffle_seed,
            "label_seed": seeds.label_seed,
        },
        accuracy=matrix,
        acc=acc(matrix),
        bwt=bwt(matrix) if len(sequence) > 1 else None,
        fwt=fwt(matrix) if config.independent and len(sequence) > 1 else None,
        task_seconds=task_seconds,
        first_task_loss=first_task_loss,
        first_task_accuracy=first_task_accuracy,
        frozen_weights_intact=stack.weights_digest() == digest,
        class_order=list(sequence.class_order),
        config=config.to_dict(),
    )


def run_once(
    config: ExperimentConfig,
    train: Dataset,
    test: Dataset,
    run: int,
) -> RunResult:
    """Runs one repetition, attaching the run and variant to any failure."""
    try:
        return _run_once(config, train, test, run)
    except (ForgetFreeError, ValueError, ArithmeticError) as error:
        raise RunError(
            f"Run {run} ({config.variant}) failed: {error}",
            run=run,
            variant=config.variant,
        ) from error


def run_experiment(
    config: ExperimentConfig,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> list[RunResult]:
    """Runs every repetition of an experiment.

    The datasets are loaded from the configured directory unless given.
    Runs differ in their class ordering seed and execute on a thread pool
    when more than one worker is configured.
    """
    train, test = datasets or load_datasets(config)
    task = partial(run_once, config, train, test)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(task, range(config.runs)))
    else:
        results = [task(run) for run in range(config.runs)]
    logger.info(
        "Finished %d run(s) of %s: mean ACC %.4f",
        len(results),
        config.variant,
        np.mean([result.acc for result in results]),
    )
    return results
