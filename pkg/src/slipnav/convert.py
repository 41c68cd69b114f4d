"""Converter interface for external datasets.

The package reads its own CSV schemas only (see :mod:`slipnav.io`). Field logs
in other layouts are brought in through a :class:`DatasetConverter`; the one
provided here handles the common case of a CSV whose columns merely need
renaming and scaling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, runtime_checkable

from .errors import DataError
from .io import IMU_COLUMNS, TRAJECTORY_COLUMNS, WHEEL_COLUMNS

TARGETS = {"imu": IMU_COLUMNS, "wheels": WHEEL_COLUMNS, "truth": TRAJECTORY_COLUMNS}


@runtime_checkable
class DatasetConverter(Protocol):
    def convert(self, source: Path, out_dir: Path) -> dict[str, Path]:
        """Write any of ``imu.csv``, ``wheels.csv``, ``truth.csv`` to ``out_dir``; return what was written."""
        ...


@dataclass(frozen=True)
class ColumnMap:
    """Source column for each target column, with an optional scale factor (e.g. deg/s to rad/s)."""

    source_file: str
    columns: Mapping[str, str]
    scale: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ColumnMapConverter:
    """Renames and scales columns of per-stream CSV files into the package schemas."""

    maps: Mapping[str, ColumnMap]  # keyed by "imu" | "wheels" | "truth"

    def convert(self, source: Path, out_dir: Path) -> dict[str, Path]:
        source, out_dir = Path(source), Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = {}
        for stream, cmap in self.maps.items():
            if stream not in TARGETS:
                raise DataError(f"unknown stream {stream!r}; choose from {sorted(TARGETS)}")
            target = TARGETS[stream]
            missing = [c for c in target if c not in cmap.columns]
            if missing:
                raise DataError(f"{stream}: no source column for {', '.join(missing)}")
            src = source / cmap.source_file
            if not src.is_file():
                raise DataError(f"input file not found: {src}")
            dst = out_dir / f"{stream}.csv"
            with src.open(newline="", encoding="utf-8") as fin, dst.open("w", newline="", encoding="utf-8") as fout:
                reader = csv.DictReader(fin)
                absent = [c for c in cmap.columns.values() if c not in (reader.fieldnames or ())]
                if absent:
                    raise DataError(f"{src}:1: missing columns {', '.join(absent)}")
                w = csv.writer(fout, lineterminator="\n")
                w.writerow(target)
                for row in reader:
                    try:
                        w.writerow([repr(float(row[cmap.columns[c]]) * cmap.scale.get(c, 1.0)) for c in target])
                    except ValueError:
                        raise DataError(f"{src}:{reader.line_num}: non-numeric field") from None
            written[stream] = dst
        return written
