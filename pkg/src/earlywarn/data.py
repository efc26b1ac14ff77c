"""Sensor-table ingestion, preprocessing and cycle-aware splitting.

A *cycle* runs from one restart to the next breakdown; a row with label 1
marks the breakdown that closes its cycle.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class IngestionError(ValueError):
    pass


@dataclass
class TimeSeriesDataset:
    timestamps: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    exclusion_mask: np.ndarray | None = None
    standardization: np.ndarray | None = None    # (D, 2): mean, std
    feature_names: list = field(default_factory=list)
    missing: np.ndarray | None = None
    reorder_count: int = 0
    dropped_features: list = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        N, D = self.features.shape
        if self.timestamps.shape != (N,):
            raise ValueError("timestamps and features disagree on row count")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
        if self.exclusion_mask is None:
            self.exclusion_mask = np.zeros(N, bool)
        if self.missing is None:
            self.missing = ~np.isfinite(self.features)
        if not self.feature_names:
            self.feature_names = [f"x{i + 1}" for i in range(D)]

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "TimeSeriesDataset":
        rows = np.asarray(rows)
        return replace(
            self,
            timestamps=self.timestamps[rows],
            features=self.features[rows],
            labels=None if self.labels is None else self.labels[rows],
            exclusion_mask=self.exclusion_mask[rows],
            missing=self.missing[rows],
        )

    def cycle_ids(self) -> np.ndarray:
        """Cycle index per row; a breakdown row belongs to the cycle it ends."""
        if self.labels is None:
            return np.zeros(self.n_rows, dtype=int)
        y = self.labels
        return np.concatenate([[0], np.cumsum(y[:-1] == 1)]).astype(int)

    def cycles(self) -> list:
        """Row-index arrays, one per cycle, in time order."""
        ids = self.cycle_ids()
        return [np.flatnonzero(ids == c) for c in np.unique(ids)]

    def failure_rows(self) -> np.ndarray:
        return np.array([]) if self.labels is None else np.flatnonzero(self.labels == 1)


def _parse_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return np.nan
    return v if np.isfinite(v) else np.nan


def load_csv(path) -> TimeSeriesDataset:
    """Read ``time,y,x1..xD`` (``y`` optional); bad numeric cells become missing."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        if "time" not in header:
            raise IngestionError(f"{path}:1: missing 'time' column")
        ti = header.index("time")
        yi = header.index("y") if "y" in header else None
        xcols = [i for i, h in enumerate(header) if i not in (ti, yi)]
        times, ys, rows, lines = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            t = _parse_float(row[ti])
            if np.isnan(t):
                raise IngestionError(f"{path}:{lineno}: unparseable time {row[ti]!r}")
            times.append(t)
            lines.append(lineno)
            if yi is not None:
                y = _parse_float(row[yi])
                ys.append(0 if np.isnan(y) else int(y))
            rows.append([_parse_float(row[i]) for i in xcols])
    if not times:
        raise IngestionError(f"{path}: no data rows")
    times = np.array(times)
    order = np.argsort(times, kind="stable")
    reorder = int(np.sum(order != np.arange(order.size)))
    if reorder:
        log.warning("%s: %d rows out of time order; sorted", path, reorder)
    ts = times[order]
    dup = np.flatnonzero(np.diff(ts) == 0)
    if dup.size:
        ln = [lines[order[i + 1]] for i in dup[:5]]
        raise IngestionError(f"{path}: duplicate timestamps at lines {ln}")
    X = np.array(rows, dtype=float).reshape(len(rows), len(xcols))[order]
    labels = np.array(ys, dtype=int)[order] if yi is not None else None
    return TimeSeriesDataset(ts, X, labels, feature_names=[header[i] for i in xcols],
                             reorder_count=reorder)


def save_csv(dataset: TimeSeriesDataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        has_y = dataset.labels is not None
        w.writerow(["time"] + (["y"] if has_y else []) + list(dataset.feature_names))
        for i in range(dataset.n_rows):
            row = [repr(float(dataset.timestamps[i]))]
            if has_y:
                row.append(str(int(dataset.labels[i])))
            row += [repr(float(v)) for v in dataset.features[i]]
            w.writerow(row)


def exclusion_after_breaks(timestamps, labels, duration_s: float) -> np.ndarray:
    """Rows strictly after a breakdown and within ``duration_s`` of it."""
    ts = np.asarray(timestamps, dtype=float)
    mask = np.zeros(ts.size, bool)
    if labels is None:
        return mask
    for i in np.flatnonzero(np.asarray(labels) == 1):
        mask |= (ts > ts[i]) & (ts <= ts[i] + duration_s + 1e-9)
    return mask


def _interpolate(ts, X):
    X = X.copy()
    for d in range(X.shape[1]):
        ok = np.isfinite(X[:, d])
        if not ok.any():
            continue
        if not ok.all():
            # np.interp holds the end values, i.e. nearest-valid fill at the edges
            X[~ok, d] = np.interp(ts[~ok], ts[ok], X[ok, d])
    return X


def split_counts(n_cycles: int, fractions=(0.6, 0.2, 0.2)) -> tuple:
    """Nearest-integer cycle counts that sum to ``n_cycles``."""
    n_tr = int(round(n_cycles * fractions[0]))
    n_va = int(round(n_cycles * fractions[1]))
    return n_tr, n_va, n_cycles - n_tr - n_va


def preprocess(dataset: TimeSeriesDataset, restart_exclusion: float = 1800.0,
               interpolate: bool = True, fit_rows=None, split=(0.6, 0.2, 0.2)) -> TimeSeriesDataset:
    """Interpolate, mask post-restart rows and standardize.

    Standardization statistics come from ``fit_rows`` minus excluded rows;
    by default ``fit_rows`` are the training cycles of :func:`split`, so
    validation and test rows never touch a statistic.
    """
    ds = dataset
    X = _interpolate(ds.timestamps, ds.features) if interpolate else ds.features.copy()
    excl = exclusion_after_breaks(ds.timestamps, ds.labels, restart_exclusion)
    if fit_rows is None:
        cycles = ds.cycles()
        n_tr = split_counts(len(cycles), split)[0] if len(cycles) >= 5 else len(cycles)
        fit_rows = np.concatenate(cycles[:n_tr])
    fit = np.zeros(ds.n_rows, bool)
    fit[np.asarray(fit_rows)] = True
    fit &= ~excl
    if not fit.any():
        raise ValueError("no rows available to fit standardization")
    mean = np.nanmean(X[fit], axis=0)
    std = np.nanstd(X[fit], axis=0)
    keep = np.isfinite(std) & (std > 1e-12)
    dropped = [ds.feature_names[i] for i in np.flatnonzero(~keep)]
    if dropped:
        log.warning("dropping zero-variance features: %s", dropped)
    X = (X[:, keep] - mean[keep]) / std[keep]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values remain after preprocessing")
    return TimeSeriesDataset(
        ds.timestamps.copy(), X, None if ds.labels is None else ds.labels.copy(), excl,
        np.column_stack([mean[keep], std[keep]]),
        [n for n, k in zip(ds.feature_names, keep) if k],
        ds.missing[:, keep], ds.reorder_count, ds.dropped_features + dropped,
    )


def split(dataset: TimeSeriesDataset, fractions=(0.6, 0.2, 0.2)):
    """Chronological (train, validation, test) split on whole cycles."""
    cycles = dataset.cycles()
    if len(cycles) < 5:
        raise ValueError(f"need at least 5 cycles to split, got {len(cycles)}")
    n_tr, n_va, _ = split_counts(len(cycles), fractions)
    parts = (cycles[:n_tr], cycles[n_tr:n_tr + n_va], cycles[n_tr + n_va:])
    return tuple(dataset.subset(np.concatenate(p)) for p in parts)


def apply_standardization(dataset: TimeSeriesDataset, feature_names, standardization,
                          restart_exclusion: float = 1800.0,
                          interpolate: bool = True) -> TimeSeriesDataset:
    """Preprocess new data with statistics fitted elsewhere (e.g. a model bundle).

    Columns are matched by name; extra columns are ignored, missing ones
    raise.
    """
    names = list(dataset.feature_names)
    missing = [n for n in feature_names if n not in names]
    if missing:
        raise IngestionError(f"columns {missing} required by the model are absent")
    cols = [names.index(n) for n in feature_names]
    stats = np.asarray(standardization, dtype=float)
    X = dataset.features[:, cols]
    X = _interpolate(dataset.timestamps, X) if interpolate else X.copy()
    X = (X - stats[:, 0]) / stats[:, 1]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values remain after preprocessing")
    excl = exclusion_after_breaks(dataset.timestamps, dataset.labels, restart_exclusion)
    return TimeSeriesDataset(
        dataset.timestamps.copy(), X, None if dataset.labels is None else dataset.labels.copy(),
        excl, stats.copy(), list(feature_names), dataset.missing[:, cols], dataset.reorder_count,
    )
