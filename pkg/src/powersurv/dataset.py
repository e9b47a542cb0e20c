"""CSV datasets of reign lengths with event indicators and attributes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import GroupedTimes
from .errors import DataError
from .nonparam import SurvivalData

__all__ = ["Dataset", "ingest_csv", "write_csv", "REQUIRED_COLUMNS"]

REQUIRED_COLUMNS = ("time_years", "event")


@dataclass(frozen=True)
class Dataset:
    """Validated records. Attribute columns are kept verbatim as strings."""

    ids: tuple[str, ...]
    time: np.ndarray
    event: np.ndarray
    names: Optional[tuple[str, ...]] = None
    attributes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ids)

    @property
    def survival(self) -> SurvivalData:
        return SurvivalData(self.time, self.event)

    def groups(self, column: str, value_a: str, value_b: Optional[str] = None) -> GroupedTimes:
        """Split times by ``column == value_a`` against ``value_b`` (or all others)."""
        if column not in self.attributes:
            raise DataError(f"no attribute column {column!r}")
        col = np.asarray(self.attributes[column])
        in_a = col == value_a
        in_b = (col == value_b) if value_b is not None else ~in_a & (col != "")
        label_b = value_b if value_b is not None else f"not {value_a}"
        return GroupedTimes(value_a, self.time[in_a], label_b, self.time[in_b])


def _parse_time(raw: str, row: int) -> float:
    try:
        t = float(raw)
    except ValueError:
        raise DataError(f"time_years {raw!r} is not a number", row=row) from None
    if not (math.isfinite(t) and t > 0):
        raise DataError(f"time_years must be positive, got {raw!r}", row=row)
    return t


def _parse_event(raw: str, row: int) -> bool:
    if raw.strip() not in ("0", "1"):
        raise DataError(f"event must be 0 or 1, got {raw!r}", row=row)
    return raw.strip() == "1"


def ingest_csv(path) -> Dataset:
    """Read and validate a dataset. Row numbers in errors count data rows from 1."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataError(f"missing required column(s): {', '.join(missing)}")
        attr_cols = [c for c in header if c not in ("id", "name") + REQUIRED_COLUMNS]
        ids, names, times, events = [], [], [], []
        attrs = {c: [] for c in attr_cols}
        seen = set()
        for row_no, rec in enumerate(reader, start=1):
            rid = rec["id"].strip() if "id" in header and rec["id"] is not None else str(row_no)
            if rid in seen:
                raise DataError(f"duplicate id {rid!r}", row=row_no)
            seen.add(rid)
            ids.append(rid)
            times.append(_parse_time(rec["time_years"] or "", row_no))
            events.append(_parse_event(rec["event"] or "", row_no))
            if "name" in header:
                names.append(rec["name"] or "")
            for c in attr_cols:
                attrs[c].append(rec[c] or "")
    if not ids:
        raise DataError("dataset has no rows")
    return Dataset(
        ids=tuple(ids),
        time=np.array(times),
        event=np.array(events, dtype=bool),
        names=tuple(names) if "name" in header else None,
        attributes=attrs,
    )


def write_csv(ds: Dataset, path) -> None:
    header = ["id"] + (["name"] if ds.names is not None else []) + list(REQUIRED_COLUMNS) + list(ds.attributes)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, rid in enumerate(ds.ids):
            row = [rid]
            if ds.names is not None:
                row.append(ds.names[i])
            row += [repr(float(ds.time[i])), int(ds.event[i])]
            row += [ds.attributes[c][i] for c in ds.attributes]
            w.writerow(row)
