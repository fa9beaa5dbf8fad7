"""Cartesian-product grid datasets, CSV ingestion and the synthetic generator.

Every flattened vector in the package uses the same ordering: lexicographic
over the axes with axis 0 varying slowest (numpy C order on ``shape``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateSplit, EmptyFile, IncompleteGrid, NonNumeric


@dataclass(frozen=True, eq=False)
class GridDataset:
    """Responses observed on every cell of ``axes[0] x ... x axes[D-1]``."""

    axes: tuple[np.ndarray, ...]
    y: np.ndarray
    labels: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).ravel() for a in self.axes)
        y = np.asarray(self.y, dtype=float).ravel()
        if len(axes) == 0:
            raise IncompleteGrid("grid needs at least one axis")
        for d, a in enumerate(axes):
            if a.size < 1:
                raise IncompleteGrid(f"axis {d} is empty")
            if not np.all(np.isfinite(a)):
                raise NonNumeric(f"axis {d} has non-finite coordinates")
            if np.any(np.diff(a) <= 0):
                raise IncompleteGrid(f"axis {d} is not strictly increasing")
        n = math.prod(a.size for a in axes)
        if y.size != n:
            raise IncompleteGrid(f"y has {y.size} values, grid has {n} cells")
        if not np.all(np.isfinite(y)):
            raise NonNumeric("responses must be finite")
        if self.labels is not None and len(self.labels) != len(axes):
            raise IncompleteGrid("one label per axis required")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "y", y)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def multi_index(self, idx=None) -> np.ndarray:
        """(len(idx), D) integer axis positions of flat grid indices."""
        if idx is None:
            idx = np.arange(self.n)
        return np.stack(np.unravel_index(np.asarray(idx), self.shape), axis=1)

    def points(self, idx=None) -> np.ndarray:
        """(len(idx), D) coordinates of flat grid indices."""
        mi = self.multi_index(idx)
        return np.stack([a[mi[:, d]] for d, a in enumerate(self.axes)], axis=1)

    def unflatten(self, v) -> np.ndarray:
        return np.asarray(v).reshape(self.shape)

    def with_y(self, y) -> "GridDataset":
        return GridDataset(self.axes, y, self.labels, dict(self.meta))


@dataclass(frozen=True, eq=False)
class TrainTestSplit:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int


def flatten(values: np.ndarray) -> np.ndarray:
    """Grid-shaped array to the package's lexicographic flat order."""
    return np.ascontiguousarray(values).ravel()


def load_csv(path, d: int) -> GridDataset:
    """Read ``d`` input columns plus one response column into a complete grid.

    The header row supplies axis labels. Rows may come in any order; the
    responses are reordered lexicographically by the sorted axis values.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise EmptyFile(f"{path}: no data rows")
    header, body = rows[0], rows[1:]
    if len(header) != d + 1:
        raise NonNumeric(f"{path}: expected {d + 1} columns, header has {len(header)}")
    try:
        table = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise NonNumeric(f"{path}: {exc}") from None
    if table.shape[1] != d + 1:
        raise NonNumeric(f"{path}: ragged rows")
    if not np.all(np.isfinite(table)):
        raise NonNumeric(f"{path}: non-finite value")

    axes, positions = [], []
    for k in range(d):
        ax, inv = np.unique(table[:, k], return_inverse=True)
        axes.append(ax)
        positions.append(inv)
    shape = tuple(a.size for a in axes)
    flat = np.ravel_multi_index(tuple(positions), shape)
    counts = np.bincount(flat, minlength=math.prod(shape))
    if np.any(counts != 1):
        missing = int(np.sum(counts == 0))
        dup = int(np.sum(counts > 1))
        raise IncompleteGrid(f"{path}: {missing} missing and {dup} duplicated grid cells")
    y = np.empty(flat.size)
    y[flat] = table[:, d]
    labels = tuple(h.strip() for h in header[:d])
    return GridDataset(tuple(axes), y, labels, {"source": str(path), "response": header[d].strip()})


def save_csv(data: GridDataset, path, response: str = "y") -> None:
    labels = data.labels or tuple(f"x{d}" for d in range(data.ndim))
    pts = data.points()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*labels, response])
        for p, v in zip(pts, data.y):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def split(data: GridDataset, test_frac: float, seed: int) -> TrainTestSplit:
    """Uniform random train/test partition of the flat grid indices."""
    if not 0.0 < test_frac < 1.0:
        raise DegenerateSplit(f"test_frac must lie in (0, 1), got {test_frac}")
    n_test = int(round(test_frac * data.n))
    if n_test == 0 or n_test == data.n:
        raise DegenerateSplit(f"{n_test} test points out of {data.n}")
    perm = np.random.default_rng(seed).permutation(data.n)
    return TrainTestSplit(np.sort(perm[n_test:]), np.sort(perm[:n_test]), seed)


@dataclass(frozen=True)
class SyntheticParams:
    """Everything used to generate a synthetic change-surface dataset."""

    length_scales: tuple[float, float]
    signal_vars: tuple[float, float]
    noise_std: float
    beta: np.ndarray  # (4, D): coefficient vector per polynomial power
    f1: np.ndarray
    f2: np.ndarray


def _rbf_factor_root(x: np.ndarray, ls: float, var: float) -> np.ndarray:
    k = var * np.exp(-0.5 * (x[:, None] - x[None, :]) ** 2 / ls**2)
    k[np.diag_indices_from(k)] += 1e-8 * var
    lam, q = np.linalg.eigh(k)
    return q * np.sqrt(np.clip(lam, 0.0, None))


def poly_weight(beta: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_i beta_i . x**i`` (elementwise powers) at each point."""
    return sum(pts**i @ beta[i] for i in range(beta.shape[0]))


def generate_synthetic(n1: int, n2: int, seed: int, *, noise_frac: float = 0.05,
                       length_scales: Sequence[float] = (0.1, 0.3),
                       signal_vars: Sequence[float] = (1.0, 0.5),
                       min_regime_frac: float = 0.2, max_draws: int = 1000):
    """Two RBF latent functions on [0, 1]^2 blended by a cubic change surface.

    The surface is ``sigmoid(w(x))`` with ``w(x) = sum_{i=0..3} beta_i . x**i``
    and ``beta_i ~ N(0, 3 I)``.  Coefficient draws are repeated until each
    regime dominates at least ``min_regime_frac`` of the grid (up to
    ``max_draws`` attempts), so the dataset actually contains a change.

    Returns ``(data, true_surface, params)`` where ``true_surface`` holds the
    weight of the first latent function at every flattened grid point.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("synthetic grid needs at least 2 points per axis")
    rng = np.random.default_rng(seed)
    axes = (np.linspace(0.0, 1.0, n1), np.linspace(0.0, 1.0, n2))
    latent = []
    for ls, var in zip(length_scales, signal_vars):
        l1 = _rbf_factor_root(axes[0], ls, var)
        l2 = _rbf_factor_root(axes[1], ls, var)
        z = rng.standard_normal((n1, n2))
        latent.append(flatten(l1 @ z @ l2.T))
    f1, f2 = latent

    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    for _ in range(max_draws):
        beta = rng.normal(0.0, math.sqrt(3.0), size=(4, 2))
        surface = 1.0 / (1.0 + np.exp(-poly_weight(beta, pts)))
        frac = np.mean(surface > 0.5)
        if min(frac, 1.0 - frac) >= min_regime_frac:
            break

    f = surface * f1 + (1.0 - surface) * f2
    noise_std = noise_frac * float(np.std(f))
    y = f + noise_std * rng.standard_normal(f.size)
    data = GridDataset(axes, y, ("x1", "x2"), {"generator": "synthetic", "seed": seed})
    params = SyntheticParams(tuple(length_scales), tuple(signal_vars), noise_std, beta, f1, f2)
    return data, surface, params
