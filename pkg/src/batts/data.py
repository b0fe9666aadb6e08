"""Two-sample data containers, CSV loading, and shared cut-point grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised when input data violates the two-sample contract."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TwoSampleDataset:
    """Two i.i.d. samples from the distributions being compared.

    ``sample0`` holds the numerator-group draws (n0 x d), ``sample1`` the
    denominator-group draws (n1 x d). Arrays are made read-only so the
    dataset can be shared freely across workers.
    """

    sample0: np.ndarray
    sample1: np.ndarray

    def __post_init__(self):
        s0 = _as_readonly(self.sample0)
        s1 = _as_readonly(self.sample1)
        object.__setattr__(self, "sample0", s0)
        object.__setattr__(self, "sample1", s1)
        if s0.ndim != 2 or s1.ndim != 2:
            raise DataError("samples must be 2-dimensional arrays")
        if s0.shape[0] < 1 or s1.shape[0] < 1:
            raise DataError("each sample must contain at least one observation")
        if s0.shape[1] != s1.shape[1]:
            raise DataError(
                f"dimension mismatch: sample0 has {s0.shape[1]} columns, "
                f"sample1 has {s1.shape[1]}"
            )
        for name, a in (("sample0", s0), ("sample1", s1)):
            bad = np.argwhere(~np.isfinite(a))
            if bad.size:
                r, c = bad[0]
                raise DataError(f"non-finite value at row {r}, col {c} in {name}")

    @property
    def n0(self) -> int:
        return self.sample0.shape[0]

    @property
    def n1(self) -> int:
        return self.sample1.shape[0]

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def zeta(self) -> float:
        return self.n0 / self.n

    @property
    def dim(self) -> int:
        return self.sample0.shape[1]

    def pooled(self) -> np.ndarray:
        return np.vstack([self.sample0, self.sample1])

    def swapped(self) -> "TwoSampleDataset":
        return TwoSampleDataset(self.sample1, self.sample0)


@dataclass(frozen=True)
class CutGrid:
    """Per-dimension candidate split thresholds shared by all trees."""

    cuts: tuple  # tuple of 1-d float arrays, one per dimension
    count_per_dim: int = 31

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(_as_readonly(c) for c in self.cuts))
        for j, c in enumerate(self.cuts):
            if c.ndim != 1 or not np.all(np.diff(c) > 0):
                raise DataError(f"cuts must be strictly increasing (dimension {j})")

    @property
    def dim(self) -> int:
        return len(self.cuts)

    def bin_indices(self, X: np.ndarray) -> np.ndarray:
        """Bin index per observation and dimension.

        A point routes left of cut ``j`` (value <= threshold) exactly when
        its bin index is <= j.
        """
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape, dtype=np.int64)
        for j, c in enumerate(self.cuts):
            out[:, j] = np.searchsorted(c, X[:, j], side="left")
        return out


def _read_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r") as fh:
        for r, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"ragged row {r} in {path}: expected {width} cells, got {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in enumerate(cells) if not _is_float(c))
                raise DataError(f"non-numeric cell at row {r}, col {bad} in {path}") from None
    if not rows:
        raise DataError(f"empty input file: {path}")
    a = np.asarray(rows, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"non-finite value at row {r}, col {c} in {path}")
    return a


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_matrix(path) -> np.ndarray:
    """Read a headerless numeric CSV into an n x d array."""
    return _read_matrix(path)


def save_matrix(path, a: np.ndarray) -> None:
    """Write a matrix as headerless CSV with round-trip-exact floats."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    with open(path, "w") as fh:
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(path0, path1) -> TwoSampleDataset:
    """Load the two groups from separate headerless CSV files."""
    s0 = _read_matrix(path0)
    s1 = _read_matrix(path1)
    if s0.shape[1] != s1.shape[1]:
        raise DataError(
            f"dimension mismatch: {path0} has {s0.shape[1]} columns, "
            f"{path1} has {s1.shape[1]}"
        )
    data = TwoSampleDataset(s0, s1)
    _check_nonconstant(data)
    return data


def load_labeled_dataset(path) -> TwoSampleDataset:
    """Load both groups from one CSV whose trailing column is a 0/1 label."""
    a = _read_matrix(path)
    if a.shape[1] < 2:
        raise DataError("labeled input needs at least one feature column plus the label")
    labels = a[:, -1]
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise DataError("trailing label column must contain only 0 and 1")
    X = a[:, :-1]
    return TwoSampleDataset(X[labels == 0.0], X[labels == 1.0])


def _check_nonconstant(data: TwoSampleDataset) -> None:
    pooled = data.pooled()
    rng = pooled.max(axis=0) - pooled.min(axis=0)
    flat = np.nonzero(rng <= 0)[0]
    if flat.size:
        raise DataError(f"constant column {flat[0]}: zero range over the pooled sample")


def build_cut_grid(data: TwoSampleDataset, count_per_dim: int = 31) -> CutGrid:
    """Equally spaced interior thresholds over the pooled per-dimension range."""
    if count_per_dim < 1:
        raise DataError("count_per_dim must be >= 1")
    pooled = data.pooled()
    lo = pooled.min(axis=0)
    hi = pooled.max(axis=0)
    cuts = []
    for j in range(data.dim):
        if hi[j] - lo[j] <= 0:
            raise DataError(f"constant column {j}: zero range over the pooled sample")
        k = np.arange(1, count_per_dim + 1, dtype=np.float64)
        cuts.append(lo[j] + k * (hi[j] - lo[j]) / (count_per_dim + 1))
    return CutGrid(tuple(cuts), count_per_dim)
