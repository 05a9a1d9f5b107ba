"""
Runs a short class-incremental sequence on synthetic clusters and compares
the projected head against plain fine-tuning.
"""

import dataclasses
import os
import sys

dir_name = os.path.dirname(__file__)
src_path = os.path.abspath(os.path.join(dir_name, "../../src"))
sys.path.append(src_path)

import numpy as np  # noqa: E402

from forgetfree import Dataset, LayerConfig  # noqa: E402
from forgetfree.experiments import (  # noqa: E402
    DatasetConfig,
    ExperimentConfig,
    HeadConfig,
    emit_results,
    run_experiment,
)


def make_clusters(per_class: int, seed: int) -> Dataset:
    """Creates ten noisy clusters of twenty features."""
    centers = np.random.default_rng(0).uniform(0, 1, (10, 20))
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(10), per_class)
    inputs = centers[labels] + rng.normal(0, 0.1, (labels.size, 20))
    return Dataset(inputs, labels, class_count=10)


def main() -> None:
    """The main function."""

    # Create the data
    datasets = make_clusters(200, seed=1), make_clusters(50, seed=2)

    # Describe a small network
    config = ExperimentConfig(
        dataset=DatasetConfig(kind="features"),
        layers=(LayerConfig(10, 4), LayerConfig(10, 4)),
        head=HeadConfig(eta=0.05, epochs=3),
        num_tasks=5,
    )

    # Run both variants and report
    for variant in ["if2net", "none"]:
        trial = dataclasses.replace(config, variant=variant)
        results = run_experiment(trial, datasets)
        print(f"{variant}: ACC {results[0].acc:.4f}, BWT {results[0].bwt:.4f}")
        emit_results(results, os.path.join(dir_name, "results", variant))


if __name__ == "__main__":
    main()
