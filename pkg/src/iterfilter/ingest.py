"""Reading rating files into :class:`SparseRatings`.

Two layouts are understood: MovieLens ``u.data`` (tab separated
``user item rating timestamp``, no header) and delimited text with a header
row whose column names are given by a :class:`DatasetDescriptor`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import SparseRatings, from_arrays

FORMATS = ("movielens", "csv")


@dataclass(frozen=True)
class DatasetDescriptor:
    format: str = "movielens"
    scale: tuple = (1.0, 5.0)
    rater_col: str = "rater"
    item_col: str = "item"
    value_col: str = "value"
    timestamp_col: Optional[str] = None
    delimiter: str = ","

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if not float(self.scale[1]) > float(self.scale[0]):
            raise ValueError(f"scale max must exceed min, got {self.scale!r}")


MOVIELENS = DatasetDescriptor()


@dataclass(frozen=True, eq=False)
class Dataset:
    """Loaded ratings plus what the solver does not need: timestamps and
    source line numbers, both aligned with ``ratings`` entry order."""

    ratings: SparseRatings
    timestamps: Optional[np.ndarray] = None
    lines: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def row_count(self) -> int:
        return self.ratings.nnz

    def summary(self) -> str:
        R = self.ratings
        return f"{R.nnz} ratings, {R.n_raters} raters, {R.n_items} items"


class DataFormatError(ValueError):
    pass


def _id_key(s: str):
    # Integer-looking ids sort numerically so MovieLens user 2 precedes user 10.
    try:
        return (0, int(s), s)
    except ValueError:
        return (1, 0, s)


def _read_rows(path: Path, desc: DatasetDescriptor):
    """Yield ``(line_no, rater, item, value, timestamp)`` as strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        if desc.format == "movielens":
            for no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) not in (3, 4):
                    raise DataFormatError(f"{path}:{no}: expected 'user item rating timestamp', got {line.rstrip()!r}")
                yield no, parts[0], parts[1], parts[2], parts[3] if len(parts) == 4 else None
            return
        reader = csv.reader(fh, delimiter=desc.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            return
        cols = {}
        for key in ("rater_col", "item_col", "value_col", "timestamp_col"):
            name = getattr(desc, key)
            if name is None:
                continue
            if name not in header:
                raise DataFormatError(f"{path}: column {name!r} missing from header {header}")
            cols[key] = header.index(name)
        for no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{no}: expected {len(header)} fields, got {len(row)}")
            ts = row[cols["timestamp_col"]].strip() if "timestamp_col" in cols else None
            yield (no, row[cols["rater_col"]].strip(), row[cols["item_col"]].strip(),
                   row[cols["value_col"]].strip(), ts)


def load(path, descriptor: DatasetDescriptor = MOVIELENS) -> Dataset:
    """Parse a rating file, normalize values and index ids densely.

    Original ids are kept on the returned ratings (``rater_ids``,
    ``item_ids``), ordered numerically when every id is an integer.

    Raises
    ------
    DataFormatError
        Malformed rows, out-of-scale values, duplicate pairs (both line
        numbers are reported) or an empty file.
    """
    path = Path(path)
    lo, hi = map(float, descriptor.scale)
    raters, items, values, stamps, lines = [], [], [], [], []
    for no, u, it, v, ts in _read_rows(path, descriptor):
        try:
            x = float(v)
        except ValueError:
            raise DataFormatError(f"{path}:{no}: rating {v!r} is not a number") from None
        if not lo <= x <= hi:
            raise DataFormatError(f"{path}:{no}: rating {x!r} outside scale [{lo}, {hi}]")
        if ts is not None:
            try:
                ts = float(ts)
            except ValueError:
                raise DataFormatError(f"{path}:{no}: timestamp {ts!r} is not a number") from None
        raters.append(u)
        items.append(it)
        values.append(x)
        stamps.append(ts)
        lines.append(no)
    if not values:
        raise DataFormatError(f"{path}: no ratings found")

    rater_ids = sorted(set(raters), key=_id_key)
    item_ids = sorted(set(items), key=_id_key)
    r_pos = {u: k for k, u in enumerate(rater_ids)}
    i_pos = {it: k for k, it in enumerate(item_ids)}
    ri = np.fromiter((r_pos[u] for u in raters), np.int64, len(raters))
    ii = np.fromiter((i_pos[it] for it in items), np.int64, len(items))
    lines = np.asarray(lines, dtype=np.int64)

    keys = ri * len(item_ids) + ii
    order = np.argsort(keys, kind="stable")
    dup = np.flatnonzero(np.diff(keys[order]) == 0)
    if dup.size:
        a, b = order[dup[0]], order[dup[0] + 1]
        raise DataFormatError(f"{path}: duplicate rating for pair (rater={raters[a]}, item={items[a]}) "
                              f"at lines {lines[a]} and {lines[b]}")

    vals = (np.asarray(values) - lo) / (hi - lo)
    ratings = from_arrays(ri, ii, vals, len(rater_ids), len(item_ids), (lo, hi),
                          tuple(_maybe_int(u) for u in rater_ids), tuple(_maybe_int(i) for i in item_ids))
    has_ts = all(s is not None for s in stamps)
    ts_sorted = np.asarray(stamps, dtype=np.float64)[order] if has_ts else None
    return Dataset(ratings, ts_sorted, lines[order])


def _maybe_int(s: str):
    try:
        return int(s)
    except ValueError:
        return s


def split_epochs(dataset: Dataset, n_epochs: int) -> list:
    """Cumulative snapshots of the ratings in timestamp order.

    Entries are sorted by timestamp (ties broken by canonical entry order) and
    cut into ``n_epochs`` contiguous batches of near-equal size; epoch ``k``
    holds every entry of batches ``1..k``. All epochs share the full rater and
    item index space so trust can be carried between them.
    """
    if n_epochs < 1:
        raise ValueError("n_epochs must be at least 1")
    if dataset.timestamps is None:
        raise ValueError("dataset has no timestamps; epochs cannot be formed")
    R = dataset.ratings
    order = np.argsort(dataset.timestamps, kind="stable")
    bounds = np.linspace(0, R.nnz, n_epochs + 1).round().astype(int)
    out = []
    for k in range(1, n_epochs + 1):
        take = order[: bounds[k]]
        out.append(from_arrays(R.rater[take], R.item[take], R.value[take], R.n_raters, R.n_items,
                               R.scale, R.rater_ids, R.item_ids))
    return out


def export(dataset: Dataset, path, descriptor: Optional[DatasetDescriptor] = None) -> None:
    """Write ratings back out in ``descriptor``'s layout on the raw scale."""
    R = dataset.ratings
    desc = descriptor or DatasetDescriptor("csv", R.scale, timestamp_col="timestamp" if dataset.timestamps is not None else None)
    raw = R.denormalize(R.value)
    ts = dataset.timestamps
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if desc.format == "movielens":
            for k in range(R.nnz):
                fields = [str(R.rater_id(R.rater[k])), str(R.item_id(R.item[k])), _num(raw[k])]
                if ts is not None:
                    fields.append(_num(ts[k]))
                fh.write("\t".join(fields) + "\n")
            return
        w = csv.writer(fh, delimiter=desc.delimiter, lineterminator="\n")
        header = [desc.rater_col, desc.item_col, desc.value_col]
        if ts is not None and desc.timestamp_col:
            header.append(desc.timestamp_col)
        w.writerow(header)
        for k in range(R.nnz):
            row = [R.rater_id(R.rater[k]), R.item_id(R.item[k]), _num(raw[k])]
            if len(header) == 4:
                row.append(_num(ts[k]))
            w.writerow(row)


def _num(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else format(x, ".17g")


def write_id_map(ids, path) -> None:
    """CSV ``internal_index,original_id``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["internal_index", "original_id"])
        for k, v in enumerate(ids):
            w.writerow([k, v])


def read_id_map(path) -> tuple:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return tuple(_maybe_int(r["original_id"]) for r in sorted(rows, key=lambda r: int(r["internal_index"])))
