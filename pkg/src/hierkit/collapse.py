"""Neural-collapse statistics NC1-NC4 for a feature snapshot and classifier head.

All statistics can be computed in the native (hyponym) label space or lifted
to any superclass label space: superclass means, weights and bias are
unweighted averages over member classes, the between-class scatter is
recomputed over superclass means, and the within-class scatter absorbs the
class-to-superclass mean offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, TYPE_CHECKING

import numpy as np
from scipy.spatial.distance import cdist

from .manifold import FeatureSet

if TYPE_CHECKING:
    from .labelspace import LabelSpace

__all__ = [
    "ClassStats",
    "ClassifierHead",
    "NCReport",
    "Nc2Stats",
    "class_statistics",
    "lift_to_superclass",
    "nc1",
    "nc2_metrics",
    "nc3_self_duality",
    "nc4_mismatch",
    "nc_report",
    "nearest_mean_labels",
]


@dataclass
class ClassStats:
    """Global mean, per-class means/counts, and within/between scatters."""

    global_mean: np.ndarray
    class_means: np.ndarray
    counts: np.ndarray
    sigma_w: np.ndarray
    sigma_b: np.ndarray

    def __post_init__(self) -> None:
        self.global_mean = np.asarray(self.global_mean, dtype=np.float64)
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.sigma_w = np.asarray(self.sigma_w, dtype=np.float64)
        self.sigma_b = np.asarray(self.sigma_b, dtype=np.float64)
        c, p = self.class_means.shape
        if self.global_mean.shape != (p,):
            raise ValueError("global_mean dimension does not match class_means")
        if self.counts.shape != (c,) or (self.counts < 1).any():
            raise ValueError("counts must list one positive count per class")
        for name, m in (("sigma_w", self.sigma_w), ("sigma_b", self.sigma_b)):
            if m.shape != (p, p):
                raise ValueError(f"{name} must be {p}x{p}")
            if not np.allclose(m, m.T, atol=1e-10 * max(1.0, float(np.abs(m).max()))):
                raise ValueError(f"{name} is not symmetric")

    @property
    def class_count(self) -> int:
        return int(self.class_means.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.class_means.shape[1])


@dataclass
class ClassifierHead:
    """Last-layer weights (one row per class) and bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a C x p matrix")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias length must match the weight row count")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("head contains non-finite values")

    @property
    def class_count(self) -> int:
        return int(self.weights.shape[0])


class Nc2Stats(NamedTuple):
    beta_mu: float
    beta_w: float
    alpha_mu: float
    alpha_w: float


@dataclass
class NCReport:
    """One NC1-NC4 snapshot; degenerate statistics are zeroed and flagged."""

    nc1: float
    beta_mu: float
    beta_w: float
    alpha_mu: float
    alpha_w: float
    nc3: float
    nc4_mismatch: float
    label_space_name: str
    degenerate_flags: tuple[str, ...] = ()


def class_statistics(f: FeatureSet) -> ClassStats:
    """Per-class means plus within/between scatter matrices.

    Sigma_B averages (mu_c - mu_G) outer products unweighted over classes;
    Sigma_W averages (h - mu_c) outer products over all examples.  Every
    class 0..C-1 must have at least one example.
    """
    x = f.vectors.astype(np.float64, copy=False)
    n, p = x.shape
    c = f.class_count
    counts = np.bincount(f.labels, minlength=c)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {empty} has no examples")
    sums = np.zeros((c, p))
    np.add.at(sums, f.labels, x)
    class_means = sums / counts[:, None]
    global_mean = x.mean(axis=0)
    dev_w = x - class_means[f.labels]
    sigma_w = dev_w.T @ dev_w / n
    dev_b = class_means - global_mean
    sigma_b = dev_b.T @ dev_b / c
    return ClassStats(global_mean=global_mean, class_means=class_means,
                      counts=counts, sigma_w=sigma_w, sigma_b=sigma_b)


def nc1(stats: ClassStats, c_count: Optional[int] = None) -> float:
    """Variability collapse: trace(Sigma_W pinv(Sigma_B)) / C.

    The pseudoinverse zeroes singular values below
    1e-10 * max(p, C) * (largest singular value), so a rank-deficient or
    zero Sigma_B is handled without error.
    """
    c = int(c_count) if c_count is not None else stats.class_count
    if c < 1:
        raise ValueError("c_count must be >= 1")
    p = stats.dimension
    rcond = 1e-10 * max(p, c)
    pinv = np.linalg.pinv(stats.sigma_b, rcond=rcond, hermitian=True)
    return float(np.einsum("ij,ji->", stats.sigma_w, pinv) / c)


def nc2_metrics(stats: ClassStats, head: ClassifierHead) -> Nc2Stats:
    """Simplex-ETF statistics: norm spread (beta) and cosine spread (alpha).

    beta_mu is the population standard deviation of the centered class-mean
    norms divided by their average; alpha_mu is the population standard
    deviation of all pairwise cosines between centered class means.  beta_w
    and alpha_w are the same statistics on the raw rows of W.
    """
    if stats.class_count < 2 or head.class_count < 2:
        raise ValueError("nc2 metrics need at least 2 classes")
    if head.class_count != stats.class_count:
        raise ValueError("head row count does not match the number of classes")

    def spread(rows: np.ndarray, what: str) -> tuple[float, float]:
        norms = np.linalg.norm(rows, axis=1)
        if (norms == 0).any():
            raise ValueError(f"zero-length {what}: cosine undefined")
        beta = float(norms.std() / norms.mean())
        unit = rows / norms[:, None]
        cos = unit @ unit.T
        iu = np.triu_indices(rows.shape[0], k=1)
        alpha = float(cos[iu].std())
        return beta, alpha

    beta_mu, alpha_mu = spread(stats.class_means - stats.global_mean, "centered class mean")
    beta_w, alpha_w = spread(head.weights, "weight row")
    return Nc2Stats(beta_mu=beta_mu, beta_w=beta_w, alpha_mu=alpha_mu, alpha_w=alpha_w)


def nc3_self_duality(stats: ClassStats, head: ClassifierHead) -> float:
    """Frobenius gap between unit-normalized W^T and the centered-means matrix.

    The centered class means are stacked as columns (p x C) to align with
    W^T; the result lies in [0, 2].
    """
    if head.class_count != stats.class_count:
        raise ValueError("head row count does not match the number of classes")
    m_dot = (stats.class_means - stats.global_mean).T
    wt = head.weights.T
    nw = float(np.linalg.norm(wt))
    nm = float(np.linalg.norm(m_dot))
    if nw == 0 or nm == 0:
        raise ValueError("nc3 undefined: zero weight or zero centered-means matrix")
    return float(np.linalg.norm(wt / nw - m_dot / nm))


def nearest_mean_labels(f: FeatureSet, stats: Optional[ClassStats] = None) -> np.ndarray:
    """Nearest-class-centroid labels; ties go to the lower class index."""
    if stats is None:
        stats = class_statistics(f)
    d2 = cdist(f.vectors.astype(np.float64, copy=False), stats.class_means,
               metric="sqeuclidean")
    return np.argmin(d2, axis=1)


def nc4_mismatch(f: FeatureSet, stats: ClassStats, head: ClassifierHead) -> float:
    """Fraction of examples where the linear rule and NCC disagree.

    Linear rule: argmax_c <w_c, h> + b_c.  NCC: argmin_c ||h - mu_c||.
    Ties break toward the lower class index in both rules.
    """
    if head.class_count != stats.class_count:
        raise ValueError("head row count does not match the number of classes")
    scores = f.vectors.astype(np.float64, copy=False) @ head.weights.T + head.bias
    linear = np.argmax(scores, axis=1)
    ncc = nearest_mean_labels(f, stats)
    return float(np.mean(linear != ncc))


def lift_to_superclass(stats: ClassStats, head: Optional[ClassifierHead],
                       s: "LabelSpace") -> tuple[ClassStats, Optional[ClassifierHead]]:
    """Re-express statistics in a superclass label space.

    Superclass means, weight rows and bias are unweighted averages over
    member classes.  Sigma_B is recomputed over superclass means.  Sigma_W
    picks up the spread of class means around their superclass mean:
    Sigma_W^(S) = Sigma_W + sum_c (n_c/N) (mu_c - mu_s(c))(mu_c - mu_s(c))^T,
    which equals averaging (h - mu_s(c)) outer products over all examples.
    The global mean is unchanged.  ``head`` may be None.
    """
    table = s.mapping()
    c = stats.class_count
    if table.shape[0] != c:
        raise ValueError(f"label space covers {table.shape[0]} classes, "
                         f"stats have {c}: partition mismatch")
    s_count = len(s.superclasses)
    member_counts = np.bincount(table, minlength=s_count).astype(np.float64)

    means_s = np.zeros((s_count, stats.dimension))
    np.add.at(means_s, table, stats.class_means)
    means_s /= member_counts[:, None]

    counts_s = np.bincount(table, weights=stats.counts, minlength=s_count).astype(np.int64)
    dev_b = means_s - stats.global_mean
    sigma_b = dev_b.T @ dev_b / s_count

    n_total = float(stats.counts.sum())
    dev = stats.class_means - means_s[table]
    sigma_w = stats.sigma_w + (dev * (stats.counts / n_total)[:, None]).T @ dev

    lifted = ClassStats(global_mean=stats.global_mean, class_means=means_s,
                        counts=counts_s, sigma_w=sigma_w, sigma_b=sigma_b)
    if head is None:
        return lifted, None
    if head.class_count != c:
        raise ValueError("head row count does not match the number of classes")
    w_s = np.zeros((s_count, head.weights.shape[1]))
    np.add.at(w_s, table, head.weights)
    w_s /= member_counts[:, None]
    b_s = np.bincount(table, weights=head.bias, minlength=s_count) / member_counts
    return lifted, ClassifierHead(weights=w_s, bias=b_s)


def nc_report(f: FeatureSet, head: ClassifierHead, label_space_name: str = "hyponyms",
              stats: Optional[ClassStats] = None) -> NCReport:
    """Compute the full battery, zeroing and flagging degenerate statistics.

    Pass lifted ``stats`` and ``head`` to evaluate a superclass space;
    ``f`` always holds the raw examples.
    """
    if stats is None:
        stats = class_statistics(f)
    flags: list[str] = []

    if not stats.sigma_b.any():
        flags.append("sigma_b_zero")
        v_nc1 = 0.0
    else:
        v_nc1 = nc1(stats)

    try:
        n2 = nc2_metrics(stats, head)
    except ValueError as e:
        flags.append(f"nc2_degenerate: {e}")
        n2 = Nc2Stats(0.0, 0.0, 0.0, 0.0)

    try:
        v_nc3 = nc3_self_duality(stats, head)
    except ValueError as e:
        flags.append(f"nc3_degenerate: {e}")
        v_nc3 = 0.0

    v_nc4 = nc4_mismatch(f, stats, head)
    return NCReport(nc1=v_nc1, beta_mu=n2.beta_mu, beta_w=n2.beta_w,
                    alpha_mu=n2.alpha_mu, alpha_w=n2.alpha_w, nc3=v_nc3,
                    nc4_mismatch=v_nc4, label_space_name=label_space_name,
                    degenerate_flags=tuple(flags))
