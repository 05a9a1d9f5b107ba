from .ablations import (
    run_ablation_init,
    run_ablation_node_blocks,
    run_rademacher_curve,
)
from .config import (
    DatasetConfig,
    ExperimentConfig,
    HeadConfig,
    SeedConfig,
    load_config,
)
from .results import emit_results, load_results
from .runner import RunResult, run_experiment

__all__ = [
    "run_ablation_init",
    "run_ablation_node_blocks",
    "run_rademacher_curve",
    "DatasetConfig",
    "ExperimentConfig",
    "HeadConfig",
    "SeedConfig",
    "load_config",
    "emit_results",
    "load_results",
    "RunResult",
    "run_experiment",
]
