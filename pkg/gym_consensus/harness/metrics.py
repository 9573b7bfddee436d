# -*- coding: utf-8 -*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus.  If not, see <https://www.gnu.org/licenses/>.
#

"""Metrics rows, CSV files and summaries over seeds."""
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

logger = logging.getLogger(__name__)

FINAL_POINTS = 5
CONFIDENCE = 0.95
BOOTSTRAP_RESAMPLES = 2000


class MetricsRecorder:
    """Append-only table of metric rows, ordered by a strictly increasing key."""

    def __init__(self, columns: Sequence[str], key: str = "step"):
        """Initialize."""
        if key not in columns:
            raise ValueError(f"The key {key!r} must be one of the columns")
        self.columns = list(columns)
        self.key = key
        self.rows: list[dict[str, Any]] = []

    def __len__(self) -> int:
        """Get the number of rows."""
        return len(self.rows)

    @property
    def last_key(self) -> Optional[Any]:
        """The key of the last row, None when empty."""
        return self.rows[-1][self.key] if self.rows else None

    def append(self, row: Mapping[str, Any]):
        """Add a row; its key must be past the last one."""
        missing = set(self.columns) - set(row)
        if missing:
            raise ValueError(f"Missing columns {sorted(missing)}")
        if self.rows and row[self.key] <= self.last_key:
            raise ValueError(
                f"{self.key} did not advance from {self.last_key} to {row[self.key]}"
            )
        self.rows.append({c: row[c] for c in self.columns})

    def extend(self, frame: pd.DataFrame):
        """Add the rows of a frame."""
        for row in frame.to_dict("records"):
            self.append(row)

    def to_frame(self) -> pd.DataFrame:
        """The rows as a frame with the declared columns."""
        return pd.DataFrame(self.rows, columns=self.columns)


def emit_csv(
    data: Union[MetricsRecorder, pd.DataFrame],
    path: Union[str, Path],
    columns: Optional[Sequence[str]] = None,
) -> Path:
    """
    Write metrics as CSV; an empty table gives a header-only file.

    :param data: a recorder or a frame.
    :param path: the output file.
    :param columns: the column order; all columns of the data if None.
    :return: the path written.
    """
    frame = data.to_frame() if isinstance(data, MetricsRecorder) else data
    if columns is not None:
        frame = frame.reindex(columns=list(columns))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def confidence_interval(values: Sequence[float], seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the median."""
    data = np.asarray(values, dtype=float)
    data = data[np.isfinite(data)]
    if len(data) == 0:
        return float("nan"), float("nan")
    if len(data) == 1 or np.ptp(data) == 0.0:
        return float(data[0]), float(data[0])
    result = stats.bootstrap(
        (data,),
        np.median,
        confidence_level=CONFIDENCE,
        n_resamples=BOOTSTRAP_RESAMPLES,
        method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return float(result.confidence_interval.low), float(result.confidence_interval.high)


def final_value(frame: pd.DataFrame, column: str, points: int = FINAL_POINTS) -> float:
    """Mean of a column over the last evaluation points."""
    if frame.empty:
        return float("nan")
    return float(frame[column].tail(points).mean())


def summarize(
    frames: Mapping[int, pd.DataFrame], column: str, points: int = FINAL_POINTS
) -> dict[str, Any]:
    """
    Summary over seeds of the final value of a column.

    >>> frames = {s: pd.DataFrame({"J": [float(s + 1)]}) for s in range(3)}
    >>> summarize(frames, "J")["median"]
    2.0

    :param frames: one frame per seed.
    :param column: the metric.
    :param points: how many final points each seed averages.
    :return: the median, its bootstrap interval and the per-seed values.
    """
    per_seed = {int(s): final_value(f, column, points) for s, f in frames.items()}
    values = list(per_seed.values())
    low, high = confidence_interval(values)
    return {
        "column": column,
        "median": float(np.median(values)) if values else float("nan"),
        "ci_low": low,
        "ci_high": high,
        "per_seed": per_seed,
    }


def read_run(run_dir: Union[str, Path], suffix: str = "") -> dict[int, pd.DataFrame]:
    """Read the per-seed CSV files `seed<k><suffix>.csv` of a run directory."""
    frames = {}
    for path in sorted(Path(run_dir).glob(f"seed*{suffix}.csv")):
        stem = path.stem[len("seed") : len(path.stem) - len(suffix)]
        if stem.isdigit():
            frames[int(stem)] = pd.read_csv(path)
    return frames
