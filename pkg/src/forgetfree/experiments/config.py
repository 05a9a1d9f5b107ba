"""
Contains the experiment configuration and its TOML loader.

A configuration file may hold the top-level keys of ExperimentConfig plus
the tables [dataset], [solver], [head], [seeds] and an array of [[layers]]
tables. Every key is optional and unknown keys are rejected.
"""

import dataclasses
import tomllib
from dataclasses import dataclass, field
from typing import Any, Self

from ..representation import Activation, LayerConfig
from ..solver import SolverSettings
from ..types import PathType
from ..utilities.validate import (
    raise_for_fraction,
    raise_for_nonnegative,
    raise_for_positive,
    raise_for_type,
)

# Recognized values
VARIANTS: tuple[str, ...] = ("if2net", "if2net-ewc", "none", "joint")
INITS: tuple[str, ...] = ("analytic", "random")
DATASET_KINDS: tuple[str, ...] = ("mnist", "fashion-mnist", "features")

# MARK: Sections


@dataclass(frozen=True)
class DatasetConfig:
    """Holds where the benchmark data lives and how it is read.

    With holdout set, test samples are held out of the training files using
    the experiment's test_fraction instead of being read from test files.
    """

    kind: str = "mnist"
    directory: str | None = None
    class_count: int | None = None
    holdout: bool = False

    def __post_init__(self) -> None:
        """Checks the dataset settings."""
        if self.kind not in DATASET_KINDS:
            raise ValueError(
                f"Unknown dataset kind '{self.kind}', expected one of "
                f"{', '.join(DATASET_KINDS)}"
            )
        if self.directory is not None:
            raise_for_type(self.directory, str, "dataset.directory")
        if self.class_count is not None:
            raise_for_type(self.class_count, int, "dataset.class_count")
            raise_for_positive(self.class_count, "dataset.class_count")
        raise_for_type(self.holdout, bool, "dataset.holdout")


@dataclass(frozen=True)
class HeadConfig:
    """Holds the output head hyperparameters and training schedule.

    Task 1 is initialized either in closed form on init_samples rows (or
    init_fraction of its rows when init_samples is unset) or randomly.
    """

    mu: float = 2.0**-30
    eta: float = 0.01
    alpha: float = 0.1
    epochs: int = 5
    batch_size: int = 64
    init: str = "analytic"
    init_fraction: float = 0.2
    init_samples: int | None = None
    ewc_mu: float = 100.0

    def __post_init__(self) -> None:
        """Checks the head settings."""
        for name in ["mu", "eta", "alpha", "init_fraction", "ewc_mu"]:
            raise_for_type(getattr(self, name), (int, float), f"head.{name}")
        raise_for_nonnegative(self.mu, "head.mu")
        raise_for_positive(self.eta, "head.eta")
        raise_for_positive(self.alpha, "head.alpha")
        raise_for_nonnegative(self.ewc_mu, "head.ewc_mu")
        raise_for_type(self.epochs, int, "head.epochs")
        raise_for_nonnegative(self.epochs, "head.epochs")
        raise_for_type(self.batch_size, int, "head.batch_size")
        raise_for_positive(self.batch_size, "head.batch_size")
        if self.init not in INITS:
            raise ValueError(
                f"Unknown head.init '{self.init}', expected one of "
                f"{', '.join(INITS)}"
            )
        if not 0 < self.init_fraction <= 1:
            raise ValueError(
                "head.init_fraction must lie in (0, 1], got "
                f"{self.init_fraction}"
            )
        if self.init_samples is not None:
            raise_for_type(self.init_samples, int, "head.init_samples")
            raise_for_positive(self.init_samples, "head.init_samples")


@dataclass(frozen=True)
class SeedConfig:
    """Holds the seeds of every random stream in an experiment."""

    weight_seed: int = 0
    ordering_seed: int = 0
    shuffle_seed: int = 0
    label_seed: int = 0

    def __post_init__(self) -> None:
        """Checks that every seed is a non-negative integer."""
        for item in dataclasses.fields(self):
            value = getattr(self, item.name)
            raise_for_type(value, int, f"seeds.{item.name}")
            raise_for_nonnegative(value, f"seeds.{item.name}")


def _default_layers() -> tuple[LayerConfig, ...]:
    return tuple(LayerConfig(25, 4) for _ in range(3))


@dataclass(frozen=True)
class ExperimentConfig:
    """Holds everything needed to reproduce an experiment."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    layers: tuple[LayerConfig, ...] = field(default_factory=_default_layers)
    solver: SolverSettings = field(default_factory=SolverSettings)
    head: HeadConfig = field(default_factory=HeadConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    variant: str = "if2net"
    runs: int = 1
    num_tasks: int = 5
    test_fraction: float = 0.2
    present_size: int = 64
    independent: bool = True
    workers: int = 1
    rademacher_draws: int = 10
    rademacher_samples: int = 500
    rademacher_mu: float = 1.0

    def __post_init__(self) -> None:
        """Checks the experiment settings."""
        if self.variant not in VARIANTS:
            raise ValueError(
                f"Unknown variant '{self.variant}', expected one of "
                f"{', '.join(VARIANTS)}"
            )
        if not self.layers:
            raise ValueError("At least one layer is required")
        for name in [
            "runs",
            "num_tasks",
            "present_size",
            "workers",
            "rademacher_draws",
            "rademacher_samples",
        ]:
            raise_for_type(getattr(self, name), int, name)
            raise_for_positive(getattr(self, name), name)
        raise_for_type(self.test_fraction, (int, float), "test_fraction")
        raise_for_fraction(self.test_fraction, "test_fraction")
        raise_for_type(self.independent, bool, "independent")
        raise_for_type(self.rademacher_mu, (int, float), "rademacher_mu")
        raise_for_positive(self.rademacher_mu, "rademacher_mu")
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def orthogonal(self) -> bool:
        """Determines whether the variant projects its gradient steps."""
        return self.variant in ("if2net", "if2net-ewc")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        """Creates a configuration from parsed TOML data."""
        data = dict(data)
        sections: dict[str, Any] = {}
        for name, section in [
            ("dataset", DatasetConfig),
            ("solver", SolverSettings),
            ("head", HeadConfig),
            ("seeds", SeedConfig),
        ]:
            if name in data:
                sections[name] = _build(section, data.pop(name), name)
        if "layers" in data:
            sections["layers"] = tuple(
                _build_layer(layer, index)
                for index, layer in enumerate(data.pop("layers"))
            )
        return _build(cls, data, "config", **sections)

    def to_dict(self) -> dict[str, Any]:
        """Converts the configuration to plain data, dropping unset values."""

        def convert(value: Any) -> Any:
            if isinstance(value, Activation):
                return value.value
            if isinstance(value, dict):
                return {
                    k: convert(v) for k, v in value.items() if v is not None
                }
            if isinstance(value, (list, tuple)):
                return [convert(v) for v in value]
            return value

        return convert(dataclasses.asdict(self))


# MARK: Loading


def _build(cls: type, data: Any, section: str, **extra: Any) -> Any:
    """Creates a dataclass from a table, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise TypeError(
            f"{section} must be a table, got {type(data).__name__}"
        )
    known = {item.name for item in dataclasses.fields(cls)}
    if unknown := sorted(set(data) - known):
        raise ValueError(f"Unknown keys in {section}: {', '.join(unknown)}")
    return cls(**data, **extra)


def _build_layer(data: Any, index: int) -> LayerConfig:
    """Creates a layer configuration, with its optional solver table."""
    section = f"layers[{index}]"
    if not isinstance(data, dict):
        raise TypeError(f"{section} must be a table")
    data = dict(data)
    extra = {}
    if "solver" in data:
        extra["solver"] = _build(
            SolverSettings, data.pop("solver"), f"{section}.solver"
        )
    return _build(LayerConfig, data, section, **extra)


def load_config(filepath: PathType) -> ExperimentConfig:
    """Loads an experiment configuration from a TOML file."""
    with open(filepath, "rb") as f:
        data = tomllib.load(f)
    return ExperimentConfig.from_dict(data)


def apply_overrides(
    config: ExperimentConfig,
    dataset_dir: str | None = None,
    seed: int | None = None,
    runs: int | None = None,
    variant: str | None = None,
) -> ExperimentConfig:
    """Replaces configuration values with the ones given on the command line.

    A seed override sets all four seeds at once.
    """
    if dataset_dir is not None:
        dataset = dataclasses.replace(config.dataset, directory=dataset_dir)
        config = dataclasses.replace(config, dataset=dataset)
    if seed is not None:
        seeds = SeedConfig(seed, seed, seed, seed)
        config = dataclasses.replace(config, seeds=seeds)
    if runs is not None:
        config = dataclasses.replace(config, runs=runs)
    if variant is not None:
        config = dataclasses.replace(config, variant=variant)
    return config
