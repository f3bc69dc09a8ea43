import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from smrec.graphs import DistanceGraph, ProximityGraph
from smrec.relation import BinaryRelation, parse_ratings


def random_relation(rng, n_users=None, n_items=None, density=0.3) -> BinaryRelation:
    n = int(n_users if n_users is not None else rng.integers(2, 21))
    m = int(n_items if n_items is not None else rng.integers(2, 21))
    dense = rng.random((n, m)) < density
    # every relation needs at least one entry
    if not dense.any():
        dense[rng.integers(n), rng.integers(m)] = True
    rows, cols = np.nonzero(dense)
    user_ids = np.arange(1, n + 1)
    item_ids = np.arange(1, m + 1)
    return BinaryRelation.from_pairs(user_ids, item_ids, np.column_stack([rows, cols]))


def random_proximity_graph(rng, size, density=0.4, low=0.05) -> ProximityGraph:
    i, j, w = [], [], []
    for a in range(size):
        for b in range(a + 1, size):
            if rng.random() < density:
                i.append(a)
                j.append(b)
                w.append(float(rng.uniform(low, 1.0)))
    return ProximityGraph.from_edges(
        np.arange(size), i, j, w, active=range(size)
    )


def random_distance_graph(rng, size, density=0.4, high=10.0) -> DistanceGraph:
    i, j, w = [], [], []
    for a in range(size):
        for b in range(a + 1, size):
            if rng.random() < density:
                i.append(a)
                j.append(b)
                w.append(float(rng.uniform(0.0, high)))
    return DistanceGraph.from_edges(
        np.arange(size), i, j, w, active=range(size)
    )


def synthetic_ratings_lines(seed=0, n_users=40, n_items=60, per_user=8) -> list[str]:
    """MovieLens-format lines with planted genre structure (deterministic)."""
    rng = np.random.default_rng(seed)
    genres = np.array_split(np.arange(1, n_items + 1), 3)
    lines = []
    for user in range(1, n_users + 1):
        favored = genres[user % 3]
        others = np.setdiff1d(np.arange(1, n_items + 1), favored)
        n_fav = max(2, int(round(per_user * 0.75)))
        picks = np.concatenate([
            rng.choice(favored, size=min(n_fav, favored.size), replace=False),
            rng.choice(others, size=per_user - min(n_fav, favored.size), replace=False),
        ])
        for item in picks:
            rating = int(rng.integers(1, 6))
            lines.append(f"{user}\t{item}\t{rating}\t{870000000 + user}")
    return lines


@pytest.fixture
def synthetic_relation():
    return parse_ratings(synthetic_ratings_lines())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
