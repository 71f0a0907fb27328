"""ETT-style CSV ingestion, benchmark splits, scaling, windows and SNR noise."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np


class DataError(ValueError):
    """Base class for dataset problems."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class NonNumericCellError(DataError):
    def __init__(self, path, row: int, column: str, value: str):
        self.row, self.column, self.value = row, column, value
        what = "blank cell" if value.strip() == "" else f"non-numeric value {value!r}"
        super().__init__(f"{path}: {what} at row {row}, column {column!r}")


class RaggedRowError(DataError):
    def __init__(self, path, row: int, expected: int, got: int):
        self.row = row
        super().__init__(f"{path}: row {row} has {got} fields, header has {expected}")


@dataclass(frozen=True)
class SeriesFrame:
    timestamps: list[str]
    values: np.ndarray
    columns: list[str]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != len(self.timestamps) or v.shape[1] != len(self.columns):
            raise DataError(
                f"inconsistent frame: values {v.shape}, {len(self.timestamps)} timestamps, "
                f"{len(self.columns)} columns")
        if not np.all(np.isfinite(v)):
            raise DataError("frame contains non-finite values")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int) -> "SeriesFrame":
        return SeriesFrame(self.timestamps[start:stop], self.values[start:stop].copy(), list(self.columns))

    def with_values(self, values: np.ndarray) -> "SeriesFrame":
        return SeriesFrame(list(self.timestamps), np.asarray(values, dtype=np.float64), list(self.columns))


def load_csv(path) -> SeriesFrame:
    """Read a CSV whose first column is the timestamp and the rest numeric."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a date column and at least one feature column")
        columns = header[1:]
        stamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise RaggedRowError(path, lineno, len(header), len(rec))
            vals = []
            for name, cell in zip(columns, rec[1:]):
                try:
                    x = float(cell)
                except ValueError:
                    raise NonNumericCellError(path, lineno, name, cell) from None
                if not math.isfinite(x):
                    raise NonNumericCellError(path, lineno, name, cell)
                vals.append(x)
            stamps.append(rec[0])
            rows.append(vals)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return SeriesFrame(stamps, values, columns)


def write_csv(frame: SeriesFrame, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *frame.columns])
        for t, row in zip(frame.timestamps, frame.values):
            w.writerow([t, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class SplitSpec:
    mode: Literal["ratio", "ett_hourly", "ett_minute"] = "ratio"
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)

    def __post_init__(self):
        if self.mode not in ("ratio", "ett_hourly", "ett_minute"):
            raise DataError(f"unknown split mode {self.mode!r}")
        if self.mode == "ratio":
            if len(self.ratios) != 3 or any(not r > 0 for r in self.ratios):
                raise DataError(f"split ratios must be three positive numbers, got {self.ratios}")
            if abs(sum(self.ratios) - 1.0) > 1e-9:
                raise DataError(f"split ratios must sum to 1, got {sum(self.ratios)}")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        """'ett_hourly', 'ett_minute' or 'ratio:0.7,0.1,0.2'."""
        text = text.strip()
        if text.startswith("ratio"):
            _, _, rest = text.partition(":")
            parts = tuple(float(p) for p in rest.split(",")) if rest else (0.7, 0.1, 0.2)
            return cls("ratio", parts)
        return cls(text)


@dataclass(frozen=True)
class Splits:
    train: SeriesFrame
    val: SeriesFrame
    test: SeriesFrame
    # target regions [start, stop) in the source frame's rows
    borders: dict[str, tuple[int, int]] = field(default_factory=dict)


def split_borders(T: int, spec: SplitSpec) -> dict[str, tuple[int, int]]:
    if spec.mode == "ratio":
        n_train = int(T * spec.ratios[0])
        n_test = int(T * spec.ratios[2])
        n_val = T - n_train - n_test
        b = [0, n_train, n_train + n_val, T]
    else:
        per_month = 30 * 24 * (4 if spec.mode == "ett_minute" else 1)
        b = [0, 12 * per_month, 16 * per_month, 20 * per_month]
        if T < b[3]:
            raise DataError(f"{spec.mode} split needs {b[3]} rows, frame has {T}")
    if min(b[1] - b[0], b[2] - b[1], b[3] - b[2]) <= 0:
        raise DataError(f"frame of {T} rows too short for split {spec}")
    return {"train": (b[0], b[1]), "val": (b[1], b[2]), "test": (b[2], b[3])}


def split(frame: SeriesFrame, spec: SplitSpec, lookback: int = 0) -> Splits:
    """Cut train/val/test; val and test frames start ``lookback`` rows early.

    The extra rows only feed inputs, so the first val/test targets are
    predictable while target regions stay disjoint.
    """
    b = split_borders(frame.T, spec)
    if lookback < 0 or lookback > b["val"][0]:
        raise DataError(f"lookback {lookback} exceeds the training region")
    return Splits(
        train=frame.rows(*b["train"]),
        val=frame.rows(b["val"][0] - lookback, b["val"][1]),
        test=frame.rows(b["test"][0] - lookback, b["test"][1]),
        borders=b,
    )


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, frame: SeriesFrame) -> SeriesFrame:
        return frame.with_values((frame.values - self.mean) / self.std)

    def inverse(self, frame: SeriesFrame) -> SeriesFrame:
        return frame.with_values(frame.values * self.std + self.mean)


def standardize(train: SeriesFrame, val: SeriesFrame, test: SeriesFrame):
    """Scale all three frames with statistics from ``train`` only."""
    if train.T == 0:
        raise DataError("empty training frame")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    flat = [c for c, s in zip(train.columns, std) if not s > 0]
    if flat:
        raise DataError(f"zero-variance column(s) in training data: {flat}")
    sc = Scaler(mean, std)
    return sc.transform(train), sc.transform(val), sc.transform(test), sc


@dataclass(frozen=True)
class WindowDataset:
    w: int
    H: int
    stride: int
    X: np.ndarray  # (N, w, d)
    Y: np.ndarray  # (N, H, d)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i):
        return self.X[i], self.Y[i]

    @property
    def pairs(self):
        return list(zip(self.X, self.Y))


def windows(frame: SeriesFrame, w: int, H: int, stride: int = 1,
            inputs: SeriesFrame | None = None) -> WindowDataset:
    """Sliding (input, target) pairs at offsets 0, stride, 2*stride, ...

    ``inputs`` optionally supplies a same-shaped frame (e.g. noise-corrupted)
    from which the lookback windows are cut; targets always come from ``frame``.
    """
    if w < 1 or H < 1 or stride < 1:
        raise DataError("w, H and stride must be positive")
    T = frame.T
    if T < w + H:
        raise DataError(f"frame has {T} rows, need at least w + H = {w + H}")
    src = frame.values if inputs is None else inputs.values
    if src.shape != frame.values.shape:
        raise DataError("input frame shape differs from target frame")
    count = (T - w - H) // stride + 1
    starts = np.arange(count) * stride
    X = np.stack([src[s:s + w] for s in starts])
    Y = np.stack([frame.values[s + w:s + w + H] for s in starts])
    return WindowDataset(w=w, H=H, stride=stride, X=X, Y=Y)


def snr_noise_variance(values: np.ndarray, snr_db: float) -> np.ndarray:
    power = np.mean(np.asarray(values, dtype=np.float64) ** 2, axis=0)
    return power / 10.0 ** (snr_db / 10.0)


def inject_noise_snr(frame: SeriesFrame, snr_db: float, seed) -> SeriesFrame:
    """Add per-column N(0, power / 10^(snr/10)) noise; power is the mean square."""
    if frame.T == 0:
        raise DataError("cannot inject noise into an empty frame")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(snr_noise_variance(frame.values, snr_db))
    return frame.with_values(frame.values + rng.standard_normal(frame.values.shape) * sd)


def dataset_stats(scaler: Scaler, borders: dict, columns: list[str]) -> dict:
    return {
        "columns": list(columns),
        "mean": [float(x) for x in scaler.mean],
        "std": [float(x) for x in scaler.std],
        "borders": {k: list(v) for k, v in borders.items()},
    }


def write_stats(stats: dict, path) -> None:
    Path(path).write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")


def synthetic_seasonal(T: int = 2000, d: int = 1, seed: int = 0, noise: float = 0.1,
                       periods=(24, 168)) -> SeriesFrame:
    """Sum of sinusoids with per-channel phase, a slow drift and Gaussian noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    vals = np.empty((T, d))
    for c in range(d):
        y = 0.002 * t * rng.uniform(-1, 1)
        for k, p in enumerate(periods):
            y += (1.0 / (k + 1)) * np.sin(2 * np.pi * t / p + rng.uniform(0, 2 * np.pi))
        vals[:, c] = y + noise * rng.standard_normal(T)
    stamps = [f"t{i}" for i in range(T)]
    return SeriesFrame(stamps, vals, [f"x{c}" for c in range(d)])
