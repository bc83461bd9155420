"""Feature-manifold analysis: mutual covers, distance matrices, and CCC.

The mutual cover rho(c_i, c_j) is the radius-averaged probability that a
query feature of class i lies within distance r of some support feature of
class j, integrated over r in [0, r_max] and normalized by r_max.  The
resulting similarity matrix is compared against taxonomy distances through
the cophenetic correlation coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .hierarchy import DistanceMatrix
from .rng import substream

__all__ = [
    "CoverConfig",
    "FeatureSet",
    "SimilarityMatrix",
    "ccc",
    "class_mean_distances",
    "cover_similarity",
    "cover_stats",
    "direct_correlation",
    "split_query_support",
    "to_distance_matrix",
]


@dataclass
class FeatureSet:
    """N x p feature vectors with class labels and an optional epoch tag."""

    vectors: np.ndarray
    labels: np.ndarray
    class_count: int
    epoch: Optional[int] = None

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors)
        if self.vectors.dtype not in (np.float32, np.float64):
            self.vectors = self.vectors.astype(np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_count = int(self.class_count)
        if self.vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ValueError("labels length does not match vector count")
        if not np.isfinite(self.vectors).all():
            raise ValueError("feature vectors contain non-finite values")
        if self.class_count < 1:
            raise ValueError("class_count must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels out of range [0, {self.class_count})")

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def present_classes(self) -> np.ndarray:
        return np.unique(self.labels)


@dataclass
class CoverConfig:
    """Knobs for the query/support split and the cover integral.

    r_max=None means the default rule: the maximum over all (query point,
    support class) minimum distances.  method is "grid" (trapezoid rule on
    grid_points radii) or "exact" (closed-form step-function integral).
    """

    k: int
    r_max: Optional[float] = None
    grid_points: int = 200
    seed: int = 0
    method: str = "grid"

    def __post_init__(self) -> None:
        self.k = int(self.k)
        self.grid_points = int(self.grid_points)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.r_max is not None:
            self.r_max = float(self.r_max)
            if not self.r_max > 0:
                raise ValueError(f"r_max must be > 0, got {self.r_max}")
        if self.method not in ("grid", "exact"):
            raise ValueError(f"method must be 'grid' or 'exact', got {self.method!r}")


@dataclass
class SimilarityMatrix:
    """Cover similarities in [0, 1]; diagonal = self-cover; possibly asymmetric."""

    labels: list[int]
    values: np.ndarray
    r_max: Optional[float] = None

    def __post_init__(self) -> None:
        self.labels = [int(x) for x in self.labels]
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValueError(f"matrix shape {v.shape} does not match {n} labels")
        if not np.isfinite(v).all():
            raise ValueError("similarity matrix has non-finite entries")
        if (v < 0).any() or (v > 1).any():
            raise ValueError("similarity entries must be in [0, 1]")
        self.values = v


def split_query_support(f: FeatureSet, cfg: CoverConfig) -> tuple[FeatureSet, FeatureSet]:
    """Sample 2k examples per class without replacement; k to each side.

    Query and support index sets are disjoint per class.  Deterministic for
    a given cfg.seed.
    """
    query_idx: list[np.ndarray] = []
    support_idx: list[np.ndarray] = []
    rng = substream(cfg.seed, 0)
    for c in f.present_classes():
        idx = np.flatnonzero(f.labels == c)
        if idx.size < 2 * cfg.k:
            raise ValueError(f"class {int(c)} has {idx.size} examples, "
                             f"needs >= {2 * cfg.k} for k={cfg.k}")
        chosen = idx[rng.permutation(idx.size)[:2 * cfg.k]]
        query_idx.append(chosen[:cfg.k])
        support_idx.append(chosen[cfg.k:])
    q = np.concatenate(query_idx)
    s = np.concatenate(support_idx)
    query = FeatureSet(f.vectors[q], f.labels[q], f.class_count, epoch=f.epoch)
    support = FeatureSet(f.vectors[s], f.labels[s], f.class_count, epoch=f.epoch)
    return query, support


def _min_distances(query: FeatureSet, support: FeatureSet,
                   classes: np.ndarray) -> np.ndarray:
    """(N_query, n_classes) matrix of min distances to each support class."""
    order = np.argsort(support.labels, kind="stable")
    sv = support.vectors[order].astype(np.float64, copy=False)
    slabels = support.labels[order]
    starts = np.searchsorted(slabels, classes, side="left")
    qv = query.vectors.astype(np.float64, copy=False)
    mins = np.empty((len(query), classes.size))
    block = max(1, int(2**22 // max(1, sv.shape[0])))  # ~32 MB of f64 per chunk
    for lo in range(0, qv.shape[0], block):
        d = cdist(qv[lo:lo + block], sv)
        mins[lo:lo + block] = np.minimum.reduceat(d, starts, axis=1)
    return mins


def cover_similarity(query: FeatureSet, support: FeatureSet,
                     cfg: CoverConfig) -> SimilarityMatrix:
    """rho(c_i, c_j) for every ordered class pair.

    For each query point of class i the minimum Euclidean distance to the
    class-j support set is computed; P_r is the fraction of query points with
    distance strictly less than r, and rho is the integral of P_r over
    [0, r_max] divided by r_max (trapezoid rule on cfg.grid_points radii, or
    the exact step-function integral when cfg.method == "exact").

    The reduction order (query order, then grid order) is fixed, so results
    are bit-reproducible.
    """
    classes = query.present_classes()
    if not np.array_equal(classes, support.present_classes()):
        raise ValueError("query and support label sets differ")
    mins = _min_distances(query, support, classes)
    r_max = cfg.r_max if cfg.r_max is not None else float(mins.max())
    if not r_max > 0:
        raise ValueError(f"r_max must be > 0, got {r_max}")

    n = classes.size
    values = np.empty((n, n))
    if cfg.method == "exact":
        # integral of 1{d < r} over [0, r_max] is max(0, r_max - d)
        contrib = np.clip(1.0 - mins / r_max, 0.0, 1.0)
        for i, c in enumerate(classes):
            rows = query.labels == c
            values[i] = contrib[rows].mean(axis=0)
    else:
        grid = np.linspace(0.0, r_max, cfg.grid_points)
        for i, c in enumerate(classes):
            rows = mins[query.labels == c]               # (n_i, n)
            p_r = (rows[:, :, None] < grid).mean(axis=0)  # (n, grid_points)
            values[i] = np.trapezoid(p_r, grid, axis=-1) / r_max
    return SimilarityMatrix(labels=list(classes), values=values, r_max=r_max)


def to_distance_matrix(a: SimilarityMatrix) -> DistanceMatrix:
    """D_F = 1 - (A + A^T)/2 off-diagonal, 0 on the diagonal.

    The raw cover matrix can be asymmetric; the arithmetic-mean
    symmetrization is recorded by construction here.
    """
    sym = (a.values + a.values.T) / 2.0
    d = 1.0 - sym
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(labels=list(a.labels), values=np.maximum(d, 0.0))


def class_mean_distances(f: FeatureSet) -> DistanceMatrix:
    """Euclidean distances between per-class mean vectors."""
    classes = f.present_classes()
    means = np.empty((classes.size, f.dimension))
    vec = f.vectors.astype(np.float64, copy=False)
    for i, c in enumerate(classes):
        means[i] = vec[f.labels == c].mean(axis=0)
    return DistanceMatrix(labels=list(classes), values=cdist(means, means))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xm = x - x.mean()
    ym = y - y.mean()
    sx = float(np.dot(xm, xm))
    sy = float(np.dot(ym, ym))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance: correlation undefined")
    # single sqrt keeps affine copies at exactly +-1 when sums are exact
    r = float(np.dot(xm, ym)) / float(np.sqrt(sx * sy))
    return min(1.0, max(-1.0, r))


def ccc(d1: DistanceMatrix, d2: DistanceMatrix) -> float:
    """Cophenetic correlation: Pearson over the i<j entries of both matrices.

    Requires identical label order and non-zero variance in each matrix;
    the diagonal and lower triangle are excluded.
    """
    if d1.labels != d2.labels:
        raise ValueError("distance matrices have different label orders")
    n = d1.size
    if n < 2:
        raise ValueError("ccc needs at least 2 classes")
    iu = np.triu_indices(n, k=1)
    return _pearson(d1.values[iu], d2.values[iu])


def direct_correlation(query: FeatureSet, support: FeatureSet, d_w: DistanceMatrix,
                       sample: int, seed: int) -> float:
    """Pearson correlation of sampled cross-class example distances vs d_w.

    Samples ``sample`` (query, support) example pairs with different class
    labels and correlates their Euclidean distance with the taxonomy distance
    of their classes; this skips materializing a class-level distance matrix.
    """
    sample = int(sample)
    if sample < 2:
        raise ValueError("sample must be >= 2")
    pos = {int(lbl): i for i, lbl in enumerate(d_w.labels)}
    for arr in (query.labels, support.labels):
        missing = set(int(x) for x in np.unique(arr)) - set(pos)
        if missing:
            raise ValueError(f"classes {sorted(missing)} missing from the distance matrix")
    rng = substream(seed, 0)
    qi_parts: list[np.ndarray] = []
    si_parts: list[np.ndarray] = []
    have = 0
    while have < sample:
        m = int((sample - have) * 1.3) + 16
        qi = rng.integers(0, len(query), m)
        si = rng.integers(0, len(support), m)
        keep = query.labels[qi] != support.labels[si]
        qi_parts.append(qi[keep])
        si_parts.append(si[keep])
        have += int(keep.sum())
    qi = np.concatenate(qi_parts)[:sample]
    si = np.concatenate(si_parts)[:sample]
    diffs = query.vectors[qi].astype(np.float64) - support.vectors[si].astype(np.float64)
    x = np.linalg.norm(diffs, axis=1)
    row = np.array([pos[int(c)] for c in query.labels[qi]])
    col = np.array([pos[int(c)] for c in support.labels[si]])
    y = d_w.values[row, col]
    return _pearson(x, y)


def cover_stats(a: SimilarityMatrix) -> tuple[float, float]:
    """(mean self-cover, mean mutual cover) = (diagonal mean, off-diagonal mean)."""
    n = len(a.labels)
    diag = float(np.diagonal(a.values).mean())
    if n < 2:
        return diag, float("nan")
    off = float((a.values.sum() - np.diagonal(a.values).sum()) / (n * n - n))
    return diag, off
