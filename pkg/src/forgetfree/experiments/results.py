"""
Contains code for writing experiment results and tables to disk.
"""

import json
import logging
from pathlib import Path

from ..types import PathType
from ..utilities.optional import requires_modules
from .runner import RunResult

# Import optional dependencies
try:
    import pandas as pd
except ImportError:
    pass

logger = logging.getLogger(__name__)

# Column order of the per-run summary
SUMMARY_COLUMNS: list[str] = [
    "run",
    "variant",
    "weight_seed",
    "ordering_seed",
    "shuffle_seed",
    "label_seed",
    "acc",
    "bwt",
    "fwt",
]


@requires_modules("pandas")
def summarize(results: list[RunResult]) -> "pd.DataFrame":
    """Creates one summary row per run in a fixed column order."""
    rows = [
        {
            "run": result.run,
            "variant": result.variant,
            **result.seeds,
            "acc": result.acc,
            "bwt": result.bwt,
            "fwt": result.fwt,
        }
        for result in results
    ]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


@requires_modules("pandas")
def write_table(df: "pd.DataFrame", filepath: PathType) -> Path:
    """Writes a table as CSV without its index."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(filepath, index=False)
    logger.info("Wrote %s", filepath)
    return filepath


@requires_modules("pandas")
def emit_results(results: list[RunResult], out_dir: PathType) -> list[Path]:
    """Writes the full records, the summary and every accuracy matrix.

    Produces results.json, summary.csv and one R_matrix_run<r>.csv per run,
    and returns the paths written. Wall-clock timings only appear in the
    JSON records, so the CSV files are identical across repeated runs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # Write the full records
    records = out_dir / "results.json"
    with open(records, "w", encoding="utf-8") as f:
        json.dump([result.to_dict() for result in results], f, indent=2)
    written = [records]

    # Write the tables
    written.append(write_table(summarize(results), out_dir / "summary.csv"))
    for result in results:
        filepath = out_dir / f"R_matrix_run{result.run}.csv"
        result.accuracy.to_dataframe().to_csv(filepath)
        written.append(filepath)
    logger.info("Wrote %d result file(s) to %s", len(written), out_dir)
    return written


def load_results(filepath: PathType) -> list[RunResult]:
    """Loads results from a results.json file."""
    with open(filepath, encoding="utf-8") as f:
        return [RunResult.from_dict(record) for record in json.load(f)]
