"""On-disk cache for closed distance graphs, keyed by input content."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

from .graphs import DistanceGraph
from .relation import BinaryRelation

__all__ = ["relation_digest", "load_closed_graph", "store_closed_graph"]

_CACHE_VERSION = 1


def relation_digest(relation: BinaryRelation) -> str:
    """Content hash of a relation's pair set and id universe."""
    h = hashlib.sha256()
    h.update(np.asarray(relation.user_ids, dtype=np.int64).tobytes())
    h.update(np.asarray(relation.item_ids, dtype=np.int64).tobytes())
    h.update(relation.pairs().tobytes())
    return h.hexdigest()


def _cache_path(cache_dir, key: str) -> Path:
    return Path(cache_dir) / f"closure-v{_CACHE_VERSION}-{key}.npz"


def closure_key(relation_hash: str, kind: str, algebra_name: str) -> str:
    raw = f"{relation_hash}:{kind}:{algebra_name}".encode()
    return hashlib.sha256(raw).hexdigest()[:32]


def load_closed_graph(cache_dir, key: str) -> DistanceGraph | None:
    path = _cache_path(cache_dir, key)
    if not path.exists():
        return None
    with np.load(path) as payload:
        return DistanceGraph(
            labels=payload["labels"],
            indptr=payload["indptr"],
            indices=payload["indices"],
            data=payload["data"],
        )


def store_closed_graph(cache_dir, key: str, graph: DistanceGraph) -> None:
    os.makedirs(cache_dir, exist_ok=True)
    path = _cache_path(cache_dir, key)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, labels=graph.labels, indptr=graph.indptr,
             indices=graph.indices, data=graph.data)
    os.replace(tmp, path)
