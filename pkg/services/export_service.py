"""Module that contains CSV and JSON emission logic."""

import json
import os
from pathlib import Path

import pandas as pd

from common.constants import (
    csv_float_format,
    curves_columns,
    gaps_columns,
    loss_columns,
    summary_columns,
)
from common.exceptions import InvalidParameterError
from logger.logger import logger


def write_csv(frame: pd.DataFrame, path: Path):
    """
    Writes a table with the fixed float format and "\\n" line endings, so
    equal tables give equal bytes.
    """
    frame.to_csv(path, index=False, float_format=csv_float_format, lineterminator="\n")
    logger.debug("Wrote %s rows to %s.", len(frame), path)


def write_json(data: dict, path: Path):
    """
    Writes indented JSON with a trailing newline.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump(data, file, indent=2)
        file.write("\n")
    logger.debug("Wrote %s.", path)


def read_csv(path: Path) -> pd.DataFrame:
    """
    Reads a table written by ``write_csv``; floats are parsed with
    round-trip precision.
    """
    return pd.read_csv(path, float_precision="round_trip")


def records_frame(records) -> pd.DataFrame:
    """
    Gap records as a table in the gaps.csv column order.
    """
    return pd.DataFrame([record.to_dict() for record in records], columns=gaps_columns)


def _prepare_directory(path: str | Path) -> Path:
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InvalidParameterError(
            f"Cannot create output directory {directory}: {e}"
        ) from e
    if not os.access(directory, os.W_OK):
        raise InvalidParameterError(f"Output directory {directory} is not writable.")
    return directory


def emit_plot_data(
    records,
    summary: pd.DataFrame,
    curves: pd.DataFrame,
    path: str | Path,
    report: dict | None = None,
) -> list[Path]:
    """
    Writes gaps.csv, summary.csv, curves.csv and, when given, report.json.
    :param records: gap records, already ordered by (n, seed)
    :param summary: per-n summary table
    :param curves: theory curves table
    :param path: output directory, created when missing
    :param report: optional trend report
    :return: written files
    """
    if len(records) == 0:
        raise InvalidParameterError("Nothing to emit: no records.")
    directory = _prepare_directory(path)

    files = [
        directory / "gaps.csv",
        directory / "summary.csv",
        directory / "curves.csv",
    ]
    write_csv(records_frame(records), files[0])
    write_csv(summary[summary_columns], files[1])
    write_csv(curves[curves_columns], files[2])
    if report is not None:
        files.append(directory / "report.json")
        write_json(report, files[-1])

    logger.info("Plot data written to %s.", directory)
    return files


def emit_loss_histories(
    histories: dict[tuple[int, int], list[float]], path: str | Path
) -> list[Path]:
    """
    One ``loss_n{n}_seed{seed}.csv`` (epoch,train_mse) per cell under
    ``path/losses``.
    """
    directory = _prepare_directory(Path(path) / "losses")
    files = []
    for (n, seed), history in sorted(histories.items()):
        frame = pd.DataFrame(
            {"epoch": range(1, len(history) + 1), "train_mse": history},
            columns=loss_columns,
        )
        file = directory / f"loss_n{n}_seed{seed}.csv"
        write_csv(frame, file)
        files.append(file)
    return files
