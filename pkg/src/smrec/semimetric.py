"""Semi-metric edge statistics, enhancement thresholds, and graph enhancement.

An edge (direct or absent) is semi-metric when some indirect path is strictly
shorter than the direct distance. The per-pair statistics quantify that: the
stretch ratio (direct over shortest) and the two directional below-average
ratios (a vertex's mean direct distance over the pair's shortest distance),
which remain informative when the direct edge does not exist at all.
Enhancement rewrites qualifying pairs with their closure proximity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .algebra import METRIC, DualAlgebra, distance_closure, to_distance
from .graphs import DistanceGraph, ProximityGraph

__all__ = [
    "SemiMetricStats",
    "ThresholdPolicy",
    "PowerLawFit",
    "DegenerateDistributionWarning",
    "mean_direct_distance",
    "mean_direct_distances",
    "semimetric_stats",
    "fit_power_law_cutoff",
    "select_threshold",
    "qualifying_mask",
    "enhance",
    "save_stats",
    "SemiMetricEnhancer",
]

# dense pairwise analysis keeps n^2 float64 arrays in memory
_DENSE_VERTEX_LIMIT = 8192


class DegenerateDistributionWarning(UserWarning):
    """Power-law cutoff estimation fell back to a percentile threshold."""


@dataclass(frozen=True)
class SemiMetricStats:
    """Columnar per-pair statistics for pairs whose shortest path beats the direct edge.

    One row per unordered pair (i < j) with 0 < shortest < direct; `direct`
    is infinite for pairs with no direct edge, making `s_ratio` infinite
    there while both below-average ratios stay finite.
    """

    i: np.ndarray
    j: np.ndarray
    direct: np.ndarray
    shortest: np.ndarray
    s_ratio: np.ndarray
    b_ij: np.ndarray  # mean direct distance at i over shortest i-j distance
    b_ji: np.ndarray

    def __len__(self) -> int:
        return len(self.i)

    def pooled_below_average(self) -> np.ndarray:
        """Both directional below-average ratios pooled into one sample."""
        return np.concatenate([self.b_ij, self.b_ji])


def mean_direct_distances(d_graph: DistanceGraph) -> np.ndarray:
    """Per-vertex mean of finite direct distances (self-loops excluded); nan if none."""
    rows = np.repeat(np.arange(d_graph.size), np.diff(d_graph.indptr))
    off = rows != d_graph.indices
    sums = np.zeros(d_graph.size)
    counts = np.zeros(d_graph.size)
    np.add.at(sums, rows[off], d_graph.data[off])
    np.add.at(counts, rows[off], 1.0)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)


def mean_direct_distance(d_graph: DistanceGraph, vertex: int) -> float | None:
    """Mean direct distance from one vertex, or None when it has no direct edges."""
    neighbors, weights = d_graph.neighbors(vertex)
    weights = weights[neighbors != vertex]
    if weights.size == 0:
        return None
    return float(weights.mean())


def semimetric_stats(
    d_graph: DistanceGraph, closed: DistanceGraph, *, tol: float = 1e-9
) -> SemiMetricStats:
    """Statistics for every pair the closure strictly improved.

    `closed` must be the distance closure of `d_graph`; a closed distance
    exceeding the direct one (beyond `tol`) is rejected as inconsistent.
    """
    if closed.size != d_graph.size or not np.array_equal(closed.labels, d_graph.labels):
        raise ValueError("closed graph does not match the direct graph's vertex set")
    if d_graph.size > _DENSE_VERTEX_LIMIT:
        raise ValueError(f"graph too large for dense pair analysis ({d_graph.size} vertices)")
    direct = d_graph.to_dense()
    shortest = closed.to_dense()
    if bool((shortest > direct + tol).any()):
        raise ValueError("closed graph is inconsistent: some closed distance exceeds the direct one")
    candidate = (shortest > 0.0) & np.isfinite(shortest) & (shortest < direct)
    iu, ju = np.nonzero(np.triu(candidate, k=1))
    d_pair = direct[iu, ju]
    sh_pair = shortest[iu, ju]
    means = mean_direct_distances(d_graph)
    return SemiMetricStats(
        i=iu,
        j=ju,
        direct=d_pair,
        shortest=sh_pair,
        s_ratio=d_pair / sh_pair,
        b_ij=means[iu] / sh_pair,
        b_ji=means[ju] / sh_pair,
    )


@dataclass(frozen=True)
class ThresholdPolicy:
    """How to pick the below-average-ratio threshold for enhancement."""

    kind: str  # "explicit-value" | "percentile" | "power-law-cutoff"
    value: float | None = None

    def __post_init__(self):
        if self.kind == "explicit-value":
            if self.value is None or self.value <= 0:
                raise ValueError("explicit threshold must be positive")
        elif self.kind == "percentile":
            if self.value is None or not 0.0 < self.value < 1.0:
                raise ValueError("percentile must lie in (0, 1)")
        elif self.kind != "power-law-cutoff":
            raise ValueError(f"unknown threshold policy {self.kind!r}")

    @classmethod
    def explicit(cls, value: float) -> "ThresholdPolicy":
        return cls("explicit-value", float(value))

    @classmethod
    def percentile(cls, fraction: float) -> "ThresholdPolicy":
        return cls("percentile", float(fraction))

    @classmethod
    def power_law(cls) -> "ThresholdPolicy":
        return cls("power-law-cutoff")

    def describe(self) -> str:
        if self.kind == "explicit-value":
            return f"explicit threshold {self.value}"
        if self.kind == "percentile":
            return f"top {self.value:.0%} of pooled below-average ratios"
        return "power-law tail cutoff of pooled below-average ratios"


@dataclass(frozen=True)
class PowerLawFit:
    """Continuous power-law tail fit chosen by minimum KS distance."""

    cutoff: float
    exponent: float
    ks_distance: float
    tail_size: int


def fit_power_law_cutoff(
    samples,
    *,
    min_tail: int = 10,
    max_candidates: int = 256,
    subsample: int = 100_000,
    seed: int = 0,
) -> PowerLawFit:
    """Estimate the lower cutoff of a power-law scaling region.

    Scans candidate cutoffs, fits the tail exponent by maximum likelihood at
    each, and scores the fit by Kolmogorov-Smirnov distance to the empirical
    tail. Because raw KS shrinks as tails get shorter, the estimate is the
    smallest cutoff whose KS is statistically indistinguishable from the
    best one (within one KS quantile, 1/sqrt(tail size)), which targets the
    lower edge of the scaling region rather than its interior.
    """
    x = np.asarray(samples, dtype=np.float64)
    x = x[np.isfinite(x) & (x > 0)]
    if x.size > subsample:
        x = np.random.default_rng(seed).choice(x, subsample, replace=False)
    x = np.sort(x)
    if x.size < 2 * min_tail or np.unique(x).size < 3:
        raise ValueError("too few distinct positive samples for a power-law fit")
    candidates = np.unique(x[: x.size - min_tail])
    if candidates.size > max_candidates:
        quantiles = np.linspace(0.0, 1.0, max_candidates)
        candidates = np.unique(np.quantile(candidates, quantiles))
    fits: list[PowerLawFit] = []
    for cutoff in candidates:
        tail = x[np.searchsorted(x, cutoff) :]
        n_tail = tail.size
        if n_tail < min_tail:
            continue
        log_sum = float(np.log(tail / cutoff).sum())
        if log_sum <= 0.0:
            continue
        exponent = 1.0 + n_tail / log_sum
        model_cdf = 1.0 - (tail / cutoff) ** (1.0 - exponent)
        steps = np.arange(n_tail + 1) / n_tail
        ks = float(
            max(
                np.abs(model_cdf - steps[:-1]).max(),
                np.abs(model_cdf - steps[1:]).max(),
            )
        )
        fits.append(PowerLawFit(float(cutoff), exponent, ks, n_tail))
    if not fits:
        raise ValueError("no viable power-law cutoff candidate")
    ks_min = min(fit.ks_distance for fit in fits)
    for fit in sorted(fits, key=lambda f: f.cutoff):
        if fit.ks_distance <= ks_min + 1.0 / np.sqrt(fit.tail_size):
            return fit
    return min(fits, key=lambda f: f.ks_distance)


def _top_fraction_threshold(pooled: np.ndarray, fraction: float) -> float:
    n = pooled.size
    k = max(1, int(np.ceil(fraction * n)))
    return float(np.partition(pooled, n - k)[n - k])


def select_threshold(
    stats: SemiMetricStats, policy: ThresholdPolicy, *, seed: int = 0
) -> float:
    """Resolve a threshold policy against the pooled below-average ratios."""
    if policy.kind == "explicit-value":
        return float(policy.value)
    pooled = stats.pooled_below_average()
    pooled = pooled[np.isfinite(pooled)]
    if pooled.size == 0:
        raise ValueError("no below-average ratios to select a threshold from")
    if policy.kind == "percentile":
        return _top_fraction_threshold(pooled, policy.value)
    try:
        return fit_power_law_cutoff(pooled, seed=seed).cutoff
    except ValueError as exc:
        warnings.warn(
            f"power-law cutoff estimation failed ({exc}); "
            "falling back to the top-10% percentile threshold",
            DegenerateDistributionWarning,
            stacklevel=2,
        )
        return _top_fraction_threshold(pooled, 0.1)


def qualifying_mask(
    stats: SemiMetricStats, threshold: float, *, require_both: bool = False
) -> np.ndarray:
    """Pairs whose below-average ratio clears the threshold.

    A pair qualifies when either directional ratio does; `require_both`
    switches to the stricter both-directions rule.
    """
    reduce = np.minimum if require_both else np.maximum
    return reduce(stats.b_ij, stats.b_ji) >= threshold


def enhance(
    p_graph: ProximityGraph,
    algebra: DualAlgebra = METRIC,
    threshold: float = np.inf,
    *,
    stats: SemiMetricStats | None = None,
    require_both: bool = False,
    n_jobs: int | None = None,
) -> ProximityGraph:
    """Rewrite qualifying semi-metric pairs with their closure proximity.

    Qualifying pairs (including pairs with no direct edge) get weight
    phi_inv(shortest distance); everything else is untouched. Precomputed
    `stats` for this graph can be passed to avoid recomputing the closure.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    if stats is None:
        direct = to_distance(p_graph, algebra)
        closed = distance_closure(direct, algebra, n_jobs=n_jobs)
        stats = semimetric_stats(direct, closed)
    chosen = qualifying_mask(stats, threshold, require_both=require_both)
    if not chosen.any():
        return ProximityGraph(
            labels=p_graph.labels,
            indptr=p_graph.indptr,
            indices=p_graph.indices,
            data=p_graph.data.copy(),
        )
    dense = p_graph.to_dense()
    rows = stats.i[chosen]
    cols = stats.j[chosen]
    weights = np.asarray(algebra.phi_inv(stats.shortest[chosen]), dtype=np.float64)
    dense[rows, cols] = weights
    dense[cols, rows] = weights
    return ProximityGraph.from_dense(p_graph.labels, dense)


def save_stats(stats: SemiMetricStats, path_or_file, labels: np.ndarray | None = None) -> None:
    """Write the stats table as TSV, one pair per row; infinities as 'inf'."""
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w", encoding="utf-8")
        close = True
    try:
        fh.write("i\tj\tdirect\tshortest\ts\tb_ij\tb_ji\n")
        ids_i = stats.i if labels is None else labels[stats.i]
        ids_j = stats.j if labels is None else labels[stats.j]
        for k in range(len(stats)):
            row = (
                int(ids_i[k]),
                int(ids_j[k]),
                repr(float(stats.direct[k])),
                repr(float(stats.shortest[k])),
                repr(float(stats.s_ratio[k])),
                repr(float(stats.b_ij[k])),
                repr(float(stats.b_ji[k])),
            )
            fh.write("\t".join(str(v) for v in row) + "\n")
    finally:
        if close:
            fh.close()


class SemiMetricEnhancer(BaseEstimator, TransformerMixin):
    """Transformer that learns an enhancement threshold from a proximity graph.

    fit() computes the distance closure and semi-metric statistics and
    resolves the threshold policy; transform() returns the enhanced graph.
    """

    def __init__(
        self,
        threshold_policy: ThresholdPolicy | None = None,
        algebra: DualAlgebra | None = None,
        require_both: bool = False,
        n_jobs: int | None = None,
    ):
        self.threshold_policy = threshold_policy
        self.algebra = algebra
        self.require_both = require_both
        self.n_jobs = n_jobs

    def fit(self, p_graph: ProximityGraph, y=None):
        algebra = self.algebra if self.algebra is not None else METRIC
        policy = (
            self.threshold_policy
            if self.threshold_policy is not None
            else ThresholdPolicy.power_law()
        )
        direct = to_distance(p_graph, algebra)
        self.closed_ = distance_closure(direct, algebra, n_jobs=self.n_jobs)
        self.stats_ = semimetric_stats(direct, self.closed_)
        self.threshold_ = select_threshold(self.stats_, policy)
        self._fitted_graph = p_graph
        return self

    def transform(self, p_graph: ProximityGraph) -> ProximityGraph:
        check_is_fitted(self, "threshold_")
        algebra = self.algebra if self.algebra is not None else METRIC
        stats = self.stats_ if p_graph is self._fitted_graph else None
        return enhance(
            p_graph,
            algebra,
            self.threshold_,
            stats=stats,
            require_both=self.require_both,
            n_jobs=self.n_jobs,
        )
