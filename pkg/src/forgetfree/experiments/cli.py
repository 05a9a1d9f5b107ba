"""
Contains the command-line interface for running experiments.
"""

import argparse
import logging
from pathlib import Path
from typing import Sequence

from ..exceptions import ForgetFreeError
from ..types import BlockSpec
from .ablations import (
    DEFAULT_GRID,
    run_ablation_init,
    run_ablation_node_blocks,
    run_rademacher_curve,
)
from .config import VARIANTS, ExperimentConfig, apply_overrides, load_config
from .results import emit_results, write_table
from .runner import run_experiment

logger = logging.getLogger(__name__)


def parse_grid(text: str) -> list[BlockSpec]:
    """Parses a grid such as '25x4,10x10' into (n_blocks, block_size) pairs."""
    grid = []
    for item in text.split(","):
        try:
            n_blocks, block_size = (int(part) for part in item.split("x"))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"Grid entries must look like 25x4, got '{item}'"
            ) from None
        grid.append((n_blocks, block_size))
    return grid


def build_parser() -> argparse.ArgumentParser:
    """Creates the argument parser with one subcommand per experiment."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration")
    common.add_argument(
        "--dataset-dir", help="directory holding the benchmark files"
    )
    common.add_argument(
        "--out", type=Path, default=Path("results"), help="output directory"
    )
    common.add_argument("--seed", type=int, help="value for every seed")
    common.add_argument("--runs", type=int, help="number of repetitions")
    common.add_argument("--variant", choices=VARIANTS, help="training variant")
    common.add_argument(
        "--verbose", action="store_true", help="log solver details"
    )

    parser = argparse.ArgumentParser(
        prog="forgetfree",
        description="Run class-incremental learning experiments.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run an experiment")
    blocks = commands.add_parser(
        "ablate-blocks", parents=[common], help="compare node-block shapes"
    )
    blocks.add_argument(
        "--grid",
        type=parse_grid,
        default=list(DEFAULT_GRID),
        help="comma-separated shapes such as 25x4,10x10",
    )
    commands.add_parser(
        "ablate-init", parents=[common], help="compare head initializations"
    )
    commands.add_parser(
        "rademacher", parents=[common], help="estimate the complexity curve"
    )
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    """Runs the selected subcommand."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    config = apply_overrides(
        config,
        dataset_dir=args.dataset_dir,
        seed=args.seed,
        runs=args.runs,
        variant=args.variant,
    )
    if args.command == "run":
        emit_results(run_experiment(config), args.out)
    elif args.command == "ablate-blocks":
        table = run_ablation_node_blocks(config, args.grid)
        write_table(table, args.out / "node_blocks.csv")
    elif args.command == "ablate-init":
        write_table(run_ablation_init(config), args.out / "init.csv")
    elif args.command == "rademacher":
        write_table(run_rademacher_curve(config), args.out / "rademacher.csv")


def main(argv: Sequence[str] | None = None) -> int:
    """The main function."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        _dispatch(args)
    except (
        ForgetFreeError,
        ValueError,
        TypeError,
        OSError,
        ModuleNotFoundError,
    ) as error:
        logger.error("%s", error)
        return 1
    return 0
