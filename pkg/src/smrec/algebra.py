"""Dual path algebras, the proximity/distance conversion map, and graph closures.

A dual algebra pairs a fuzzy conjunction/disjunction on proximities in [0,1]
with their distance-side images on [0,inf], linked by a strictly decreasing
bijection phi with phi(1) = 0. Transitive closure composes a proximity graph
with itself until a fixed point; distance closure does the same on the
distance side, where the shipped metric instance (legs add, paths compete by
min) reduces to all-pairs shortest paths and runs as a parallel per-source
priority-queue search instead of fixed-point matrix composition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graphs import DistanceGraph, ProximityGraph

__all__ = [
    "DualAlgebra",
    "METRIC",
    "MAXMIN",
    "AlgebraError",
    "ClosureConvergenceError",
    "hamacher_product",
    "validate_algebra",
    "to_distance",
    "to_proximity",
    "distance_closure",
    "transitive_closure",
    "metric_closure",
]

FIXED_POINT_TOL = 1e-12


class AlgebraError(ValueError):
    """The supplied operations do not satisfy the dual-algebra constraints."""


class ClosureConvergenceError(RuntimeError):
    """Fixed-point composition did not converge within the iteration budget."""

    def __init__(self, iterations: int):
        super().__init__(f"closure did not converge within {iterations} compositions")
        self.iterations = iterations


def _p_to_d(p):
    """Proximity to distance: reciprocal minus one; 0 maps to infinity."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return 1.0 / p - 1.0


def _d_to_p(d):
    d = np.asarray(d, dtype=np.float64)
    return 1.0 / (d + 1.0)


def hamacher_product(a, b):
    """T-norm a*b / (a + b - a*b); the conjunction whose distance image is addition."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = a + b - a * b
    safe = np.where(denom > 0.0, denom, 1.0)
    return np.where(denom > 0.0, a * b / safe, 0.0)


@dataclass(frozen=True)
class DualAlgebra:
    """Paired proximity-side and distance-side path operations linked by phi.

    All operations must accept numpy arrays (broadcasting binary functions).
    `conjunction` combines proximities along consecutive path legs and
    `disjunction` chooses among alternative paths; `distance_combine` and
    `distance_choose` are their images under `phi`.
    """

    name: str
    conjunction: Callable
    disjunction: Callable
    distance_combine: Callable
    distance_choose: Callable
    phi: Callable = _p_to_d
    phi_inv: Callable = _d_to_p


METRIC = DualAlgebra(
    name="metric",
    conjunction=hamacher_product,
    disjunction=np.maximum,
    distance_combine=np.add,
    distance_choose=np.minimum,
)

MAXMIN = DualAlgebra(
    name="max-min",
    conjunction=np.minimum,
    disjunction=np.maximum,
    distance_combine=np.maximum,
    distance_choose=np.minimum,
)


def validate_algebra(
    algebra: DualAlgebra, *, samples: int = 256, tol: float = 1e-9, seed: int = 0
) -> None:
    """Check the four commuting equations and the phi constraints by sampling.

    Raises AlgebraError on the first violated constraint. Sampled proximity
    arguments cover (0, 1] including the endpoint 1.
    """
    rng = np.random.default_rng(seed)
    p = np.concatenate([rng.uniform(1e-6, 1.0, samples), [1.0, 1.0, 0.5]])
    q = np.concatenate([rng.uniform(1e-6, 1.0, samples), [1.0, 0.5, 1.0]])
    x, y = algebra.phi(p), algebra.phi(q)

    one = np.asarray(algebra.phi(1.0))
    if not np.isclose(float(one), 0.0, rtol=0.0, atol=tol):
        raise AlgebraError("phi(1) must be 0")
    with np.errstate(divide="ignore"):
        limit = float(np.asarray(algebra.phi(0.0)))
    if not np.isinf(limit):
        raise AlgebraError("phi(p) must tend to infinity as p tends to 0")
    if not np.allclose(algebra.phi_inv(x), p, rtol=tol, atol=tol):
        raise AlgebraError("phi_inv is not the inverse of phi on sampled points")
    ps = np.sort(p)
    if not (np.diff(np.asarray(algebra.phi(ps))) <= 0.0).all():
        raise AlgebraError("phi must be monotone decreasing")

    pairs = (
        ("distance_combine", algebra.distance_combine(x, y),
         algebra.phi(algebra.conjunction(p, q))),
        ("distance_choose", algebra.distance_choose(x, y),
         algebra.phi(algebra.disjunction(p, q))),
        ("disjunction", algebra.disjunction(p, q),
         algebra.phi_inv(algebra.distance_choose(x, y))),
        ("conjunction", algebra.conjunction(p, q),
         algebra.phi_inv(algebra.distance_combine(x, y))),
    )
    for name, left, right in pairs:
        if not np.allclose(left, right, rtol=tol, atol=tol, equal_nan=True):
            worst = float(np.nanmax(np.abs(np.asarray(left) - np.asarray(right))))
            raise AlgebraError(
                f"{name} violates the isomorphism constraint (max deviation {worst:.3e})"
            )


def to_distance(p_graph: ProximityGraph, algebra: DualAlgebra = METRIC) -> DistanceGraph:
    """Map every stored proximity edge through phi; absent stays absent."""
    return DistanceGraph(
        labels=p_graph.labels,
        indptr=p_graph.indptr,
        indices=p_graph.indices,
        data=np.asarray(algebra.phi(p_graph.data), dtype=np.float64),
    )


def to_proximity(d_graph: DistanceGraph, algebra: DualAlgebra = METRIC) -> ProximityGraph:
    """Inverse of to_distance on the stored structure."""
    return ProximityGraph(
        labels=d_graph.labels,
        indptr=d_graph.indptr,
        indices=d_graph.indices,
        data=np.asarray(algebra.phi_inv(d_graph.data), dtype=np.float64),
    )


def _kernel_combine_code(algebra: DualAlgebra) -> int | None:
    if algebra.distance_choose is not np.minimum:
        return None
    if algebra.distance_combine is np.add:
        return 0
    if algebra.distance_combine is np.maximum:
        return 1
    return None


def _run_shortest_paths(d_graph: DistanceGraph, combine: int, n_jobs: int | None):
    import numba

    from . import _kernels

    active = d_graph.loop_mask()
    args = (
        d_graph.indptr.astype(np.int64, copy=False),
        d_graph.indices.astype(np.int32, copy=False),  # halves the hot memory stream
        d_graph.data.astype(np.float64, copy=False),
        active,
        combine,
    )
    if n_jobs is None:
        dense = _kernels.shortest_paths(*args)
    else:
        previous = numba.get_num_threads()
        numba.set_num_threads(max(1, min(n_jobs, numba.config.NUMBA_NUM_THREADS)))
        try:
            dense = _kernels.shortest_paths(*args)
        finally:
            numba.set_num_threads(previous)
    # symmetrize away last-ulp asymmetry from per-direction summation order
    return np.minimum(dense, dense.T), active


def _dense_distance_graph(labels, dense, active_mask) -> DistanceGraph:
    finite = np.isfinite(dense)
    iu, ju = np.nonzero(np.triu(finite, k=1))
    return DistanceGraph.from_edges(
        labels, iu, ju, dense[iu, ju], active=np.flatnonzero(active_mask)
    )


def _compose_once(dense, combine, choose, init):
    n = dense.shape[0]
    acc = np.full_like(dense, init)
    with np.errstate(invalid="ignore"):
        for k in range(n):
            acc = choose(acc, combine(dense[:, k : k + 1], dense[k : k + 1, :]))
    return acc


def _fixed_point(dense, combine, choose, init, max_iter, tol):
    current = dense
    for _ in range(max_iter):
        composed = _compose_once(current, combine, choose, init)
        with np.errstate(invalid="ignore"):
            gap = np.abs(current - composed)
        gap = np.where(np.isnan(gap), 0.0, gap)  # inf-to-inf entries did not move
        if float(np.max(gap, initial=0.0)) <= tol:
            return composed
        current = composed
    raise ClosureConvergenceError(max_iter)


def distance_closure(
    d_graph: DistanceGraph,
    algebra: DualAlgebra = METRIC,
    *,
    method: str = "auto",
    n_jobs: int | None = None,
    max_iter: int | None = None,
    tol: float = FIXED_POINT_TOL,
) -> DistanceGraph:
    """Smallest attainable path distance between every pair of vertices.

    With the metric algebra this is all-pairs shortest paths. `method` is
    "auto" (per-source search when the algebra supports it, else fixed-point
    matrix composition), "shortest-path", or "fixed-point".
    """
    validate_algebra(algebra)
    combine = _kernel_combine_code(algebra)
    if method == "auto":
        method = "shortest-path" if combine is not None else "fixed-point"
    if method == "shortest-path":
        if combine is None:
            raise AlgebraError(
                "per-source search needs distance_choose=minimum and "
                "distance_combine in (add, maximum)"
            )
        dense, active = _run_shortest_paths(d_graph, combine, n_jobs)
        return _dense_distance_graph(d_graph.labels, dense, active)
    if method != "fixed-point":
        raise ValueError(f"unknown closure method {method!r}")
    budget = max_iter if max_iter is not None else max(d_graph.size, 2)
    closed = _fixed_point(
        d_graph.to_dense(),
        algebra.distance_combine,
        algebra.distance_choose,
        np.inf,
        budget,
        tol,
    )
    return _dense_distance_graph(d_graph.labels, closed, d_graph.loop_mask())


def transitive_closure(
    p_graph: ProximityGraph,
    algebra: DualAlgebra = METRIC,
    *,
    method: str = "auto",
    n_jobs: int | None = None,
    max_iter: int | None = None,
    tol: float = FIXED_POINT_TOL,
) -> ProximityGraph:
    """Fixed point of proximity self-composition; edges never decrease.

    "auto" routes through the distance side and the per-source kernel when
    the algebra allows it; "fixed-point" composes directly in proximity
    space (also the cross-check oracle for the kernel route).
    """
    p_graph.validate()
    validate_algebra(algebra)
    kernel_ready = _kernel_combine_code(algebra) is not None
    if method == "auto":
        method = "shortest-path" if kernel_ready else "fixed-point"
    if method == "shortest-path":
        closed = distance_closure(
            to_distance(p_graph, algebra),
            algebra,
            method="shortest-path",
            n_jobs=n_jobs,
        )
        return to_proximity(closed, algebra)
    if method != "fixed-point":
        raise ValueError(f"unknown closure method {method!r}")
    budget = max_iter if max_iter is not None else max(p_graph.size, 2)
    closed_dense = _fixed_point(
        p_graph.to_dense(),
        algebra.conjunction,
        algebra.disjunction,
        0.0,
        budget,
        tol,
    )
    return ProximityGraph.from_dense(p_graph.labels, closed_dense)


def metric_closure(d_graph: DistanceGraph, n_jobs: int | None = None) -> DistanceGraph:
    """All-pairs shortest paths (the metric specialization of distance_closure)."""
    return distance_closure(d_graph, METRIC, method="shortest-path", n_jobs=n_jobs)
