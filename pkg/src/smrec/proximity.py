"""Co-occurrence proximity graphs from a binary relation.

Edge weights are intersection-over-union of the two entities' counterpart
sets, which for binary entries is exactly the sum-of-min over sum-of-max
co-occurrence measure. Computation goes through a sparse co-occurrence
product, so cost scales with the number of co-occurring pairs rather than
with all n^2 pairs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graphs import ProximityGraph
from .relation import BinaryRelation

__all__ = ["item_proximity", "user_proximity"]


def _jaccard_graph(incidence: sp.csr_matrix, labels: np.ndarray) -> ProximityGraph:
    """Jaccard weights between rows of a binary entity x counterpart matrix."""
    if incidence.nnz == 0:
        raise ValueError("relation is empty")
    counts = incidence.astype(np.int32)
    co = (counts @ counts.T).tocsr()
    co.sort_indices()
    degree = np.asarray(counts.sum(axis=1)).ravel()
    rows = np.repeat(np.arange(co.shape[0]), np.diff(co.indptr))
    cols = co.indices
    shared = co.data.astype(np.float64)
    union = degree[rows] + degree[cols] - co.data
    weights = shared / union
    upper = rows < cols
    return ProximityGraph.from_edges(
        labels,
        rows[upper],
        cols[upper],
        weights[upper],
        active=np.flatnonzero(degree > 0),
    )


def item_proximity(relation: BinaryRelation) -> ProximityGraph:
    """Item-item proximity: fraction of either item's users both items share."""
    return _jaccard_graph(relation.matrix.T.tocsr(), relation.item_ids)


def user_proximity(relation: BinaryRelation) -> ProximityGraph:
    """User-user proximity: fraction of either user's items both users share."""
    return _jaccard_graph(relation.matrix.tocsr(), relation.user_ids)
