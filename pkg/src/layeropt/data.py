"""Dataset ingestion, min-max normalization, splitting, synthetic teachers.

Snapshot format: datasets (and the normalization record fitted on them) are
cached as numpy ``.npz`` archives with arrays ``X``, ``Y`` and, when present,
``x_min``/``x_max``/``y_min``/``y_max``; ``provenance`` is stored as a string.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import SeededRng
from .network import Architecture, forward, init_weights


@dataclass
class Dataset:
    X: np.ndarray   # (P, d) features, samples as rows
    Y: np.ndarray   # (P, m) targets
    provenance: str = ""

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=np.float64))
        if self.Y.shape[0] != self.X.shape[0]:
            raise ValueError(f"X has {self.X.shape[0]} rows, Y has {self.Y.shape[0]}")

    @property
    def num_samples(self) -> int:
        return self.X.shape[0]

    @property
    def num_features(self) -> int:
        return self.X.shape[1]

    @property
    def num_targets(self) -> int:
        return self.Y.shape[1]


class ParseError(ValueError):
    """Malformed delimited input; carries 1-based row/column of the offender."""

    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        super().__init__(message)


def load_delimited(path, target_columns, delimiter=",", has_header=False) -> Dataset:
    """Read a numeric delimited text file and split it into features/targets.

    `target_columns` are 1-based column indices. No delimiter auto-detection:
    the caller states the format explicitly.
    """
    rows = []
    width = None
    with open(path) as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if has_header:
        lines = lines[1:]
    for r, line in enumerate(lines, start=1):
        cells = line.split(delimiter) if delimiter != " " else line.split()
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"row {r} has {len(cells)} cells, expected {width}",
                             row=r)
        parsed = []
        for c, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} at row {r}, column {c}",
                    row=r, col=c) from None
        rows.append(parsed)
    if not rows:
        raise ParseError("file contains no data rows")
    mat = np.array(rows, dtype=np.float64)
    targets = sorted(set(int(c) for c in target_columns))
    if any(not 1 <= c <= mat.shape[1] for c in targets):
        raise ValueError(f"target columns {targets} outside 1..{mat.shape[1]}")
    tmask = np.zeros(mat.shape[1], dtype=bool)
    tmask[[c - 1 for c in targets]] = True
    return Dataset(X=mat[:, ~tmask], Y=mat[:, tmask], provenance=str(path))


@dataclass
class NormalizationModel:
    """Per-column min/max learned from training rows; maps train columns to
    [0,1]. Constant columns map to 0 (the scale divisor is forced to 1)."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray

    @staticmethod
    def fit(train: Dataset) -> "NormalizationModel":
        return NormalizationModel(
            x_min=train.X.min(axis=0), x_max=train.X.max(axis=0),
            y_min=train.Y.min(axis=0), y_max=train.Y.max(axis=0))

    @staticmethod
    def _scale(values, lo, hi):
        span = hi - lo
        span = np.where(span == 0.0, 1.0, span)
        return (values - lo) / span

    @staticmethod
    def _unscale(values, lo, hi):
        span = hi - lo
        span = np.where(span == 0.0, 1.0, span)
        return values * span + lo

    def apply(self, ds: Dataset) -> Dataset:
        return Dataset(X=self._scale(ds.X, self.x_min, self.x_max),
                       Y=self._scale(ds.Y, self.y_min, self.y_max),
                       provenance=ds.provenance + "|minmax")

    def invert_targets(self, Y: np.ndarray) -> np.ndarray:
        return self._unscale(Y, self.y_min, self.y_max)

    def invert_features(self, X: np.ndarray) -> np.ndarray:
        return self._unscale(X, self.x_min, self.x_max)


def fit_apply_normalization(train: Dataset, test: Dataset):
    """Fit min-max scaling on the training rows only, apply to both splits."""
    if train.num_samples == 0:
        raise ValueError("training split is empty")
    model = NormalizationModel.fit(train)
    return model.apply(train), model.apply(test), model


def train_test_split(ds: Dataset, test_fraction: float, seed: int):
    """Seeded shuffle then cut; train gets ceil(P*(1-frac)) rows."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0,1)")
    P = ds.num_samples
    perm = SeededRng(seed).permutation(P)
    n_train = math.ceil(P * (1.0 - test_fraction))
    tr, te = perm[:n_train], perm[n_train:]
    return (Dataset(ds.X[tr], ds.Y[tr], ds.provenance + "|train"),
            Dataset(ds.X[te], ds.Y[te], ds.provenance + "|test"))


def synth_teacher_dataset(arch: Architecture, P: int, noise_sd: float,
                          seed: int) -> Dataset:
    """Inputs uniform in [0,1]^d; targets are a seeded teacher network's
    outputs plus Gaussian noise. Realizable by construction at noise_sd=0."""
    rng = SeededRng(seed)
    teacher = init_weights(arch, rng.child(1))
    X = rng.child(2).uniform(0.0, 1.0, size=(P, arch.input_dim))
    Y, _ = forward(teacher, X)
    if noise_sd > 0:
        Y = Y + rng.child(3).normal(0.0, noise_sd, size=Y.shape)
    return Dataset(X=X, Y=Y,
                   provenance=f"synthetic(seed={seed},P={P},noise_sd={noise_sd})")


def save_dataset(path, ds: Dataset, norm: NormalizationModel = None):
    """Snapshot a dataset (and optional normalization record) to ``.npz``."""
    arrays = {"X": ds.X, "Y": ds.Y, "provenance": np.array(ds.provenance)}
    if norm is not None:
        arrays.update(x_min=norm.x_min, x_max=norm.x_max,
                      y_min=norm.y_min, y_max=norm.y_max)
    np.savez(path, **arrays)


def load_dataset(path):
    """Load a snapshot; returns (Dataset, NormalizationModel or None)."""
    with np.load(path, allow_pickle=False) as z:
        ds = Dataset(X=z["X"], Y=z["Y"], provenance=str(z["provenance"]))
        norm = None
        if "x_min" in z.files:
            norm = NormalizationModel(x_min=z["x_min"], x_max=z["x_max"],
                                      y_min=z["y_min"], y_max=z["y_max"])
    return ds, norm
