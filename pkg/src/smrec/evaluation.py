"""Top-n retrieval metrics and rank concordance against a held-out test split.

Precision/recall/F1 look only at the first n ranked items. The degree of
agreement is a concordance over all (test, non-test) pairs of non-watched
items: the fraction ranked with the test item ahead, counting tied scores
as half an agreement. It therefore depends only on score order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .recommenders import EmptyProfileError, ScoredRecommendations
from .relation import BinaryRelation

__all__ = [
    "UserEvaluation",
    "EvalReport",
    "precision_recall_f1",
    "degree_of_agreement",
    "agreement_counts",
    "evaluate",
    "aggregate",
]


@dataclass(frozen=True)
class UserEvaluation:
    precision: float
    recall: float
    f1: float
    agreement: float | None
    test_size: int
    agreements: float  # concordant pair count (ties count 0.5)
    pairs: int  # total (test, non-test) pairs


@dataclass
class EvalReport:
    """Per-user metrics plus macro and pooled aggregates."""

    top_n: int
    per_user: dict[int, UserEvaluation]
    skipped: dict[int, str]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_agreement: float | None
    pooled_agreement: float | None
    config: dict = field(default_factory=dict)

    @property
    def included_users(self) -> int:
        return len(self.per_user)

    def to_dict(self) -> dict:
        return {
            "top_n": self.top_n,
            "aggregate": {
                "included_users": self.included_users,
                "skipped_users": len(self.skipped),
                "macro_precision": self.macro_precision,
                "macro_recall": self.macro_recall,
                "macro_f1": self.macro_f1,
                "macro_agreement": self.macro_agreement,
                "pooled_agreement": self.pooled_agreement,
            },
            "per_user": {
                str(user): {
                    "precision": entry.precision,
                    "recall": entry.recall,
                    "f1": entry.f1,
                    "agreement": entry.agreement,
                    "test_size": entry.test_size,
                    "agreements": entry.agreements,
                    "pairs": entry.pairs,
                }
                for user, entry in sorted(self.per_user.items())
            },
            "skipped": {str(u): reason for u, reason in sorted(self.skipped.items())},
            "config": self.config,
        }


def _as_item_indices(recs: ScoredRecommendations, item_ids) -> np.ndarray:
    wanted = np.unique(np.asarray(list(item_ids), dtype=np.int64))
    pos = np.searchsorted(recs.item_ids, wanted)
    pos = np.clip(pos, 0, recs.item_ids.size - 1)
    known = recs.item_ids[pos] == wanted
    if not known.all():
        missing = wanted[~known]
        raise KeyError(f"test item ids not in the item universe: {missing[:5].tolist()}")
    return pos


def precision_recall_f1(
    recs: ScoredRecommendations, test_items, n: int
) -> tuple[float, float, float] | None:
    """Retrieval metrics at the first n ranked items; None when test is empty."""
    if n < 1:
        raise ValueError("n must be at least 1")
    test_idx = _as_item_indices(recs, test_items)
    if test_idx.size == 0:
        return None
    top = recs.ranking[:n]
    hits = int(np.isin(top, test_idx, assume_unique=True).sum())
    precision = hits / top.size
    recall = hits / test_idx.size
    f1 = 0.0 if hits == 0 else 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def agreement_counts(
    recs: ScoredRecommendations, test_items, *, watched=None
) -> tuple[float, int] | None:
    """Concordant-pair count and total pairs over (test, non-test) candidates.

    Candidates are all non-watched items; `watched` defaults to the ranking's
    excluded set. Tied scores contribute half an agreement. Returns None when
    either side of the pairing is empty.
    """
    test_idx = _as_item_indices(recs, test_items)
    watched_idx = recs.excluded if watched is None else np.asarray(watched, dtype=np.int64)
    candidate = np.ones(recs.scores.size, dtype=bool)
    candidate[watched_idx] = False
    test_mask = np.zeros_like(candidate)
    test_mask[test_idx] = True
    test_mask &= candidate
    other_mask = candidate & ~test_mask
    test_scores = recs.scores[test_mask]
    other_scores = np.sort(recs.scores[other_mask])
    if test_scores.size == 0 or other_scores.size == 0:
        return None
    below = np.searchsorted(other_scores, test_scores, side="left")
    upto = np.searchsorted(other_scores, test_scores, side="right")
    agreements = float(below.sum()) + 0.5 * float((upto - below).sum())
    return agreements, int(test_scores.size) * int(other_scores.size)


def degree_of_agreement(
    recs: ScoredRecommendations, test_items, *, watched=None
) -> float | None:
    """Fraction of (test, non-test) pairs ranked with the test item ahead."""
    counts = agreement_counts(recs, test_items, watched=watched)
    if counts is None:
        return None
    agreements, pairs = counts
    return agreements / pairs


def aggregate(
    per_user: dict[int, UserEvaluation],
    skipped: dict[int, str] | None = None,
    *,
    top_n: int,
    config: dict | None = None,
) -> EvalReport:
    """Macro-average the per-user metrics and pool the agreement pairs."""
    if not per_user:
        raise ValueError("no included users to aggregate")
    entries = list(per_user.values())
    with_agreement = [e for e in entries if e.agreement is not None]
    total_pairs = sum(e.pairs for e in with_agreement)
    return EvalReport(
        top_n=top_n,
        per_user=dict(per_user),
        skipped=dict(skipped or {}),
        macro_precision=float(np.mean([e.precision for e in entries])),
        macro_recall=float(np.mean([e.recall for e in entries])),
        macro_f1=float(np.mean([e.f1 for e in entries])),
        macro_agreement=(
            float(np.mean([e.agreement for e in with_agreement]))
            if with_agreement
            else None
        ),
        pooled_agreement=(
            sum(e.agreements for e in with_agreement) / total_pairs
            if total_pairs
            else None
        ),
        config=dict(config or {}),
    )


def evaluate(
    recommender,
    test_relation: BinaryRelation,
    *,
    top_n: int = 10,
    users=None,
    config: dict | None = None,
) -> EvalReport:
    """Run a fitted recommender against every test user and aggregate.

    Users with an empty test set or an empty training profile are skipped
    and reported separately.
    """
    train = recommender.relation_
    if not np.array_equal(train.item_ids, test_relation.item_ids) or not np.array_equal(
        train.user_ids, test_relation.user_ids
    ):
        raise ValueError("train and test relations must share one id universe")
    if users is None:
        users = [int(u) for u in train.user_ids]
    per_user: dict[int, UserEvaluation] = {}
    skipped: dict[int, str] = {}
    for user in users:
        uidx = test_relation.user_index[int(user)]
        test_idx = test_relation.items_of(uidx)
        if test_idx.size == 0:
            skipped[int(user)] = "empty test set"
            continue
        try:
            recs = recommender.score_items(int(user))
        except EmptyProfileError:
            skipped[int(user)] = "empty training profile"
            continue
        test_ids = test_relation.item_ids[test_idx]
        prf = precision_recall_f1(recs, test_ids, top_n)
        watched = train.items_of(uidx)
        counts = agreement_counts(recs, test_ids, watched=watched)
        agreements, pairs = counts if counts is not None else (0.0, 0)
        per_user[int(user)] = UserEvaluation(
            precision=prf[0],
            recall=prf[1],
            f1=prf[2],
            agreement=(agreements / pairs) if pairs else None,
            test_size=int(test_idx.size),
            agreements=agreements,
            pairs=pairs,
        )
    if not per_user:
        raise ValueError("every user was skipped; nothing to evaluate")
    return aggregate(per_user, skipped, top_n=top_n, config=config)
