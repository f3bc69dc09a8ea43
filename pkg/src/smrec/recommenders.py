"""Collaborative-filtering recommenders over proximity graphs.

Four variants: item- and user-based scoring, each optionally run on a
semi-metric enhanced graph. Module-level functions implement the scoring
rules; the estimator classes wrap them in a fit/recommend interface where
graph construction and enhancement happen once at fit time and are shared
by every per-user call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import cache as _cache
from .algebra import METRIC, DualAlgebra, distance_closure, to_distance
from .graphs import ProximityGraph
from .proximity import item_proximity, user_proximity
from .relation import BinaryRelation
from .semimetric import (
    SemiMetricStats,
    ThresholdPolicy,
    enhance,
    qualifying_mask,
    select_threshold,
    semimetric_stats,
)

__all__ = [
    "ScoredRecommendations",
    "EmptyProfileError",
    "ColdStartWarning",
    "rank_items",
    "item_based_scores",
    "item_based_sm_scores",
    "user_based_scores",
    "user_based_sm_scores",
    "ItemProximityRecommender",
    "ItemSemiMetricRecommender",
    "UserProximityRecommender",
    "UserSemiMetricRecommender",
    "make_recommender",
]


class EmptyProfileError(ValueError):
    """User has no training entries; per-user evaluation should skip them."""

    def __init__(self, user: int):
        super().__init__(f"user {user} has an empty training profile")
        self.user = user


class ColdStartWarning(UserWarning):
    """A user had fewer positive-proximity neighbors than requested."""


@dataclass(frozen=True)
class ScoredRecommendations:
    """Full per-user scoring result.

    `ranking` holds every non-excluded item index exactly once, ordered by
    descending score with ties broken by ascending item id; `excluded` is
    the user's training profile (empty when profile exclusion is off).
    """

    user: int  # external user id
    item_ids: np.ndarray  # external item ids aligned with `scores`
    scores: np.ndarray
    ranking: np.ndarray  # item indices
    excluded: np.ndarray  # item indices

    def ranked_ids(self) -> np.ndarray:
        return self.item_ids[self.ranking]

    def top(self, n: int) -> np.ndarray:
        """External ids of the n best-ranked items."""
        return self.item_ids[self.ranking[:n]]

    def score_of(self, item_id: int) -> float:
        k = int(np.searchsorted(self.item_ids, item_id))
        if k >= self.item_ids.size or self.item_ids[k] != item_id:
            raise KeyError(item_id)
        return float(self.scores[k])


def rank_items(scores: np.ndarray, excluded=()) -> np.ndarray:
    """Deterministic ranking: score descending, then item index ascending."""
    keep = np.ones(scores.size, dtype=bool)
    excluded = np.asarray(excluded, dtype=np.int64)
    keep[excluded] = False
    idx = np.flatnonzero(keep)
    order = np.lexsort((idx, -scores[idx]))
    return idx[order]


def _graph_csr(graph: ProximityGraph) -> sp.csr_matrix:
    """Zero-copy scipy view of the graph's CSR arrays."""
    n = graph.size
    return sp.csr_matrix((graph.data, graph.indices, graph.indptr), shape=(n, n))


def _user_profile(relation: BinaryRelation, user: int) -> tuple[int, np.ndarray]:
    try:
        uidx = relation.user_index[int(user)]
    except KeyError:
        raise KeyError(f"unknown user id {user}") from None
    profile = relation.items_of(uidx)
    if profile.size == 0:
        raise EmptyProfileError(int(user))
    return uidx, profile


def _package(relation, user, scores, profile, exclude_profile) -> ScoredRecommendations:
    excluded = profile if exclude_profile else np.empty(0, dtype=np.int64)
    return ScoredRecommendations(
        user=int(user),
        item_ids=relation.item_ids,
        scores=scores,
        ranking=rank_items(scores, excluded),
        excluded=excluded,
    )


def item_based_scores(
    item_graph: ProximityGraph,
    relation: BinaryRelation,
    user: int,
    *,
    exclude_profile: bool = True,
) -> ScoredRecommendations:
    """Score every item by its mean proximity to the user's profile items.

    Absent edges contribute zero: the mean divides by the profile size, not
    by the number of present edges.
    """
    uidx, profile = _user_profile(relation, user)
    rows = _graph_csr(item_graph)[profile]
    scores = np.asarray(rows.sum(axis=0)).ravel() / profile.size
    return _package(relation, user, scores, profile, exclude_profile)


def user_based_scores(
    user_graph: ProximityGraph,
    relation: BinaryRelation,
    user: int,
    k: int,
    *,
    exclude_profile: bool = True,
) -> ScoredRecommendations:
    """Score every item by how many of the user's k nearest users rated it.

    Neighbors are the k highest-proximity users (self excluded, ties broken
    by ascending user id). With fewer than k positive-proximity users, all
    of them are used and a ColdStartWarning is issued.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    uidx, profile = _user_profile(relation, user)
    neighbors, weights = user_graph.neighbors(uidx)
    others = neighbors != uidx
    neighbors, weights = neighbors[others], weights[others]
    if neighbors.size < k:
        warnings.warn(
            f"user {user}: only {neighbors.size} positive-proximity neighbors "
            f"available (k={k})",
            ColdStartWarning,
            stacklevel=2,
        )
    order = np.lexsort((neighbors, -weights))[:k]
    scores = np.zeros(relation.m)
    for v in neighbors[order]:
        scores[relation.items_of(int(v))] += 1.0
    return _package(relation, user, scores, profile, exclude_profile)


def _enhanced_graph(
    graph: ProximityGraph,
    algebra: DualAlgebra,
    policy: ThresholdPolicy | None,
    *,
    require_both: bool = False,
    n_jobs: int | None = None,
    closed=None,
) -> tuple[ProximityGraph, float, int, SemiMetricStats]:
    direct = to_distance(graph, algebra)
    if closed is None:
        closed = distance_closure(direct, algebra, n_jobs=n_jobs)
    stats = semimetric_stats(direct, closed)
    policy = policy if policy is not None else ThresholdPolicy.power_law()
    if len(stats) == 0 and policy.kind != "explicit-value":
        warnings.warn(
            "training graph has no semi-metric pairs; enhancement is a no-op",
            UserWarning,
            stacklevel=3,
        )
        threshold = np.inf
    else:
        threshold = select_threshold(stats, policy)
    enhanced = enhance(graph, algebra, threshold, stats=stats, require_both=require_both)
    inserted = int(qualifying_mask(stats, threshold, require_both=require_both).sum())
    return enhanced, threshold, inserted, stats


def item_based_sm_scores(
    item_graph: ProximityGraph,
    relation: BinaryRelation,
    user: int,
    algebra: DualAlgebra = METRIC,
    policy: ThresholdPolicy | None = None,
    *,
    exclude_profile: bool = True,
) -> ScoredRecommendations:
    """Item-based scoring on the semi-metric enhanced graph.

    One-shot convenience that recomputes the enhancement; for whole
    experiments use ItemSemiMetricRecommender, which enhances once at fit.
    """
    enhanced, _, _, _ = _enhanced_graph(item_graph, algebra, policy)
    return item_based_scores(enhanced, relation, user, exclude_profile=exclude_profile)


def user_based_sm_scores(
    user_graph: ProximityGraph,
    relation: BinaryRelation,
    user: int,
    k: int,
    algebra: DualAlgebra = METRIC,
    policy: ThresholdPolicy | None = None,
    *,
    exclude_profile: bool = True,
) -> ScoredRecommendations:
    """User-based scoring on the semi-metric enhanced graph (see above)."""
    enhanced, _, _, _ = _enhanced_graph(user_graph, algebra, policy)
    return user_based_scores(enhanced, relation, user, k, exclude_profile=exclude_profile)


def _check_relation(relation) -> None:
    if not isinstance(relation, BinaryRelation):
        raise TypeError(f"expected a BinaryRelation, got {type(relation).__name__}")
    if relation.entry_count == 0:
        raise ValueError("relation has no entries")


def _cached_closure(graph, relation, kind, algebra, cache_dir, n_jobs):
    if cache_dir is None:
        return None
    key = _cache.closure_key(_cache.relation_digest(relation), kind, algebra.name)
    closed = _cache.load_closed_graph(cache_dir, key)
    if closed is None:
        closed = distance_closure(to_distance(graph, algebra), algebra, n_jobs=n_jobs)
        _cache.store_closed_graph(cache_dir, key, closed)
    return closed


class ItemProximityRecommender(BaseEstimator):
    """Item-based recommender on the raw item proximity graph."""

    def __init__(self, exclude_profile: bool = True):
        self.exclude_profile = exclude_profile

    def fit(self, relation: BinaryRelation, y=None):
        _check_relation(relation)
        self.relation_ = relation
        self.item_graph_ = item_proximity(relation)
        return self

    def score_items(self, user: int) -> ScoredRecommendations:
        check_is_fitted(self, "item_graph_")
        return item_based_scores(
            self.item_graph_, self.relation_, user, exclude_profile=self.exclude_profile
        )

    def recommend(self, user: int, n: int = 10) -> np.ndarray:
        return self.score_items(user).top(n)


class ItemSemiMetricRecommender(BaseEstimator):
    """Item-based recommender on the semi-metric enhanced item graph.

    Enhancement (closure, statistics, threshold selection) runs once in
    fit(); fitted attributes expose the selected threshold, the statistics,
    and the number of rewritten pairs.
    """

    def __init__(
        self,
        threshold_policy: ThresholdPolicy | None = None,
        algebra: DualAlgebra | None = None,
        require_both: bool = False,
        n_jobs: int | None = None,
        exclude_profile: bool = True,
        cache_dir=None,
    ):
        self.threshold_policy = threshold_policy
        self.algebra = algebra
        self.require_both = require_both
        self.n_jobs = n_jobs
        self.exclude_profile = exclude_profile
        self.cache_dir = cache_dir

    def fit(self, relation: BinaryRelation, y=None):
        _check_relation(relation)
        algebra = self.algebra if self.algebra is not None else METRIC
        self.relation_ = relation
        base = item_proximity(relation)
        closed = _cached_closure(base, relation, "item", algebra, self.cache_dir, self.n_jobs)
        self.item_graph_, self.threshold_, self.inserted_edges_, self.stats_ = _enhanced_graph(
            base,
            algebra,
            self.threshold_policy,
            require_both=self.require_both,
            n_jobs=self.n_jobs,
            closed=closed,
        )
        return self

    def score_items(self, user: int) -> ScoredRecommendations:
        check_is_fitted(self, "item_graph_")
        return item_based_scores(
            self.item_graph_, self.relation_, user, exclude_profile=self.exclude_profile
        )

    def recommend(self, user: int, n: int = 10) -> np.ndarray:
        return self.score_items(user).top(n)


class UserProximityRecommender(BaseEstimator):
    """User-neighborhood recommender on the raw user proximity graph."""

    def __init__(self, k: int = 60, exclude_profile: bool = True):
        self.k = k
        self.exclude_profile = exclude_profile

    def fit(self, relation: BinaryRelation, y=None):
        _check_relation(relation)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        self.relation_ = relation
        self.user_graph_ = user_proximity(relation)
        return self

    def score_items(self, user: int) -> ScoredRecommendations:
        check_is_fitted(self, "user_graph_")
        return user_based_scores(
            self.user_graph_, self.relation_, user, self.k,
            exclude_profile=self.exclude_profile,
        )

    def recommend(self, user: int, n: int = 10) -> np.ndarray:
        return self.score_items(user).top(n)


class UserSemiMetricRecommender(BaseEstimator):
    """User-neighborhood recommender on the semi-metric enhanced user graph."""

    def __init__(
        self,
        k: int = 60,
        threshold_policy: ThresholdPolicy | None = None,
        algebra: DualAlgebra | None = None,
        require_both: bool = False,
        n_jobs: int | None = None,
        exclude_profile: bool = True,
        cache_dir=None,
    ):
        self.k = k
        self.threshold_policy = threshold_policy
        self.algebra = algebra
        self.require_both = require_both
        self.n_jobs = n_jobs
        self.exclude_profile = exclude_profile
        self.cache_dir = cache_dir

    def fit(self, relation: BinaryRelation, y=None):
        _check_relation(relation)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        algebra = self.algebra if self.algebra is not None else METRIC
        self.relation_ = relation
        base = user_proximity(relation)
        closed = _cached_closure(base, relation, "user", algebra, self.cache_dir, self.n_jobs)
        self.user_graph_, self.threshold_, self.inserted_edges_, self.stats_ = _enhanced_graph(
            base,
            algebra,
            self.threshold_policy,
            require_both=self.require_both,
            n_jobs=self.n_jobs,
            closed=closed,
        )
        return self

    def score_items(self, user: int) -> ScoredRecommendations:
        check_is_fitted(self, "user_graph_")
        return user_based_scores(
            self.user_graph_, self.relation_, user, self.k,
            exclude_profile=self.exclude_profile,
        )

    def recommend(self, user: int, n: int = 10) -> np.ndarray:
        return self.score_items(user).top(n)


_ALGORITHMS = {
    "item-prox": ItemProximityRecommender,
    "item-sm": ItemSemiMetricRecommender,
    "user-prox": UserProximityRecommender,
    "user-sm": UserSemiMetricRecommender,
}


def make_recommender(algorithm: str, **params) -> BaseEstimator:
    """Instantiate one of the four named recommenders by algorithm key."""
    try:
        cls = _ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; choose from {sorted(_ALGORITHMS)}"
        ) from None
    accepted = cls().get_params()
    kwargs = {name: value for name, value in params.items() if name in accepted}
    return cls(**kwargs)
