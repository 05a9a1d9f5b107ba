import numpy as np
import pytest

from forgetfree.data import Dataset
from forgetfree.experiments.config import (
    DatasetConfig,
    ExperimentConfig,
    HeadConfig,
)
from forgetfree.representation import LayerConfig
from forgetfree.solver import SolverSettings

# MARK: Fixtures


def make_blobs(per_class: int, seed: int) -> Dataset:
    """Creates four tight clusters of six features in [0, 1]."""
    centers = np.random.default_rng(0).uniform(0.1, 0.9, (4, 6))
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(4), per_class)
    inputs = centers[labels] + rng.normal(0, 0.03, (labels.size, 6))
    return Dataset(inputs, labels, class_count=4)


@pytest.fixture
def datasets() -> tuple[Dataset, Dataset]:
    """Creates small train and test datasets."""
    return make_blobs(24, seed=1), make_blobs(8, seed=2)


@pytest.fixture
def config() -> ExperimentConfig:
    """Creates a configuration small enough to run in a test."""
    return ExperimentConfig(
        dataset=DatasetConfig(kind="features"),
        layers=(LayerConfig(2, 3), LayerConfig(2, 3)),
        solver=SolverSettings(max_iters=100),
        head=HeadConfig(epochs=2, batch_size=8, eta=0.05),
        num_tasks=2,
        present_size=16,
        rademacher_draws=3,
        rademacher_samples=20,
    )
