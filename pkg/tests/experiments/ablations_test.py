"""
Contains tests for the experiments.ablations module.
"""

import dataclasses
import re

import numpy as np
import pytest

from forgetfree.data import Dataset
from forgetfree.experiments import ablations
from forgetfree.experiments.ablations import (
    run_ablation_init,
    run_ablation_node_blocks,
    run_rademacher_curve,
    with_first_layer,
)
from forgetfree.experiments.config import ExperimentConfig
from forgetfree.experiments.runner import run_experiment
from forgetfree.representation import LayerConfig

# MARK: Fixtures


@pytest.fixture
def quick(config: ExperimentConfig) -> ExperimentConfig:
    """Creates a configuration without independent models."""
    return dataclasses.replace(config, independent=False)


def eight_blobs(per_class: int, seed: int) -> Dataset:
    """Creates eight tight clusters of eight features with shuffled rows."""
    centers = np.random.default_rng(20).uniform(0, 1, (8, 8))
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(8), per_class))
    inputs = centers[labels] + rng.normal(0, 0.02, (labels.size, 8))
    return Dataset(inputs, labels, class_count=8)


# MARK: Node blocks


def test_run_ablation_node_blocks(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests comparing node-block shapes of one width."""
    grid = [(1, 6), (2, 3), (3, 2)]
    df = run_ablation_node_blocks(quick, grid, datasets)
    assert list(df.columns) == [
        "n_blocks",
        "block_size",
        "acc_mean",
        "acc_std",
        "bwt_mean",
        "runs",
    ]
    assert sorted(zip(df["n_blocks"], df["block_size"])) == grid
    assert list(df["acc_mean"]) == sorted(df["acc_mean"], reverse=True)
    assert list(df["runs"]) == [1, 1, 1]
    assert np.all(df["acc_std"] == 0)


def test_run_ablation_node_blocks_errors(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests the checks on the node-block grid."""
    with pytest.raises(ValueError, match="grid is empty"):
        run_ablation_node_blocks(quick, [], datasets)
    message = "share one layer width, got [4, 6]"
    with pytest.raises(ValueError, match=re.escape(message)):
        run_ablation_node_blocks(quick, [(2, 3), (2, 2)], datasets)


def test_run_ablation_node_blocks_single_entry(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests that a grid with one shape gives a table with one row."""
    df = run_ablation_node_blocks(quick, [(3, 2)], datasets)
    assert len(df) == 1
    assert (df["n_blocks"][0], df["block_size"][0]) == (3, 2)


def test_with_first_layer(quick: ExperimentConfig) -> None:
    """Tests that only the first hidden layer is reshaped."""
    deep = dataclasses.replace(
        quick, layers=(LayerConfig(2, 3), LayerConfig(5, 4, "sigmoid"))
    )
    reshaped = with_first_layer(deep, 6, 1)
    first, second = reshaped.layers
    assert (first.n_blocks, first.block_size) == (6, 1)
    assert second == deep.layers[1]
    assert reshaped.head == deep.head


def test_run_ablation_node_blocks_keeps_deeper_layers(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    """Tests that every run of the grid keeps the deeper layers."""
    deep = dataclasses.replace(
        quick, layers=(LayerConfig(2, 3), LayerConfig(5, 4))
    )
    seen = []

    def record(config: ExperimentConfig, datasets: tuple) -> list:
        seen.append(config.layers)
        return run_experiment(config, datasets)

    monkeypatch.setattr(ablations, "run_experiment", record)
    run_ablation_node_blocks(deep, [(1, 6), (3, 2)], datasets)
    assert [layers[0].n_blocks for layers in seen] == [1, 3]
    assert all(layers[1] == LayerConfig(5, 4) for layers in seen)


# MARK: Initialization


def test_run_ablation_init(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests comparing random and closed-form initialization."""
    df = run_ablation_init(quick, datasets, epochs=(0, 2), sizes=(10,))
    assert list(df["init"]) == ["random"] * 2 + ["analytic-10"] * 2
    assert list(df["epochs"]) == [0, 2, 0, 2]
    assert np.all(np.isfinite(df["first_task_loss"]))
    assert np.all((df["acc"] >= 0) & (df["acc"] <= 1))


def test_run_ablation_init_favors_analytic(quick: ExperimentConfig) -> None:
    """Tests that the closed form beats a random start at every epoch count."""
    config = dataclasses.replace(
        quick, layers=(LayerConfig(3, 4),), num_tasks=4
    )
    df = run_ablation_init(
        config,
        (eight_blobs(24, seed=1), eight_blobs(8, seed=2)),
        epochs=(1, 3),
        sizes=(10,),
        random_eta=0.05,
        analytic_eta=0.05,
    )
    drawn = df[df["init"] == "random"].set_index("epochs")
    analytic = df[df["init"] == "analytic-10"].set_index("epochs")
    for count in [1, 3]:
        assert (
            analytic.loc[count, "first_task_loss"]
            < drawn.loc[count, "first_task_loss"]
        )
        assert analytic.loc[count, "acc"] > drawn.loc[count, "acc"]


# MARK: Complexity


def test_run_rademacher_curve(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests the accumulated complexity over sessions."""
    config = dataclasses.replace(quick, runs=2)
    df = run_rademacher_curve(config, datasets)
    assert list(df.columns) == ["run", "session", "task_value", "accumulated"]
    assert list(df["run"]) == [0, 0, 1, 1]
    assert list(df["session"]) == [1, 2, 1, 2]
    for _, group in df.groupby("run"):
        assert np.all(np.diff(group["accumulated"]) >= 0)
        assert group["accumulated"].iloc[-1] == pytest.approx(
            group["task_value"].sum()
        )

    # The curve depends only on the seeds
    again = run_rademacher_curve(config, datasets)
    assert again.equals(df)


def test_run_rademacher_curve_mu(
    quick: ExperimentConfig,
    datasets: tuple[Dataset, Dataset],
) -> None:
    """Tests that the ridge weight of the complexity fit is configurable."""
    loose = run_rademacher_curve(
        dataclasses.replace(quick, rademacher_mu=1e-3), datasets
    )
    tight = run_rademacher_curve(
        dataclasses.replace(quick, rademacher_mu=1e3), datasets
    )
    assert np.all(loose["task_value"] > tight["task_value"])
