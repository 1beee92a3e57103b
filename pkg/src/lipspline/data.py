"""Circle-classification data, error rates and CSV round-trips."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .rng import as_rng

CIRCLE_RADIUS_SQ = 2.0 / math.pi  # circle of area 2


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise DatasetError(f"{self.X.shape[0]} inputs but {self.y.shape[0]} labels")

    def __len__(self):
        return self.y.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.split == other.split
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


def circle_label(x1, x2):
    """1 inside the closed disc of area 2 centred at the origin, else 0."""
    inside = np.asarray(x1, dtype=float) ** 2 + np.asarray(x2, dtype=float) ** 2 <= CIRCLE_RADIUS_SQ
    out = inside.astype(int)
    return int(out) if out.ndim == 0 else out


def gen_circle(M: int, rng=None, split: str = "train") -> Dataset:
    """``M`` uniform points on ``[-1, 1]^2`` labelled by :func:`circle_label`."""
    if M < 1:
        raise DatasetError("need at least one sample")
    rng = as_rng(rng)
    X = rng.uniform(-1.0, 1.0, size=(M, 2))
    return Dataset(X, circle_label(X[:, 0], X[:, 1]).astype(float), split)


def error_rate(predict, ds: Dataset) -> float:
    """Percentage misclassified at threshold 0.5.

    ``predict`` is a network or any callable mapping inputs to probabilities.
    """
    if len(ds) == 0:
        raise DatasetError("error rate of an empty dataset is undefined")
    prob = np.asarray(predict(ds.X), dtype=float).reshape(len(ds), -1)[:, 0]
    wrong = (prob >= 0.5).astype(float) != ds.y
    return 100.0 * float(np.count_nonzero(wrong)) / len(ds)


def export_csv(ds: Dataset, path) -> None:
    if ds.X.shape[1] != 2:
        raise DatasetError("CSV export expects two input columns")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "label"])
        for (a, b), lab in zip(ds.X, ds.y):
            writer.writerow([repr(float(a)), repr(float(b)), int(lab)])


def import_csv(path, split: str = "train") -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    if [h.strip() for h in rows[0]] != ["x1", "x2", "label"]:
        raise DatasetError(f"{path}:1: expected header 'x1,x2,label', got {','.join(rows[0])!r}")
    X, y = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DatasetError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        try:
            a, b, lab = float(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        if lab not in (0.0, 1.0):
            raise DatasetError(f"{path}:{lineno}: label must be 0 or 1, got {row[2]!r}")
        X.append((a, b))
        y.append(lab)
    if not X:
        raise DatasetError(f"{path}: no samples")
    return Dataset(np.array(X), np.array(y), split)
