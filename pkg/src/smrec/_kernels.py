"""Parallel per-source shortest-path kernels for distance closures.

One kernel serves both shipped algebras: path legs combine either by
addition (metric) or by maximum (minimax); paths compete by minimum.
Sources run in parallel threads over the immutable CSR arrays; each writes
only its own output row. Indices are int32 to keep the per-edge memory
stream small; the kernel is bandwidth-bound on dense co-occurrence graphs.
"""

import numpy as np
from numba import njit, prange

COMBINE_ADD = 0
COMBINE_MAX = 1


@njit(cache=True)
def _sift_up(heap, pos, dist, i):
    v = heap[i]
    dv = dist[v]
    while i > 0:
        parent = (i - 1) >> 1
        pv = heap[parent]
        if dist[pv] <= dv:
            break
        heap[i] = pv
        pos[pv] = i
        i = parent
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def _sift_down(heap, pos, dist, size, i):
    v = heap[i]
    dv = dist[v]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size and dist[heap[right]] < dist[heap[child]]:
            child = right
        cv = heap[child]
        if dv <= dist[cv]:
            break
        heap[i] = cv
        pos[cv] = i
        i = child
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def _dijkstra_row(indptr, indices, data, src, combine, dist, heap, pos):
    n = dist.shape[0]
    for v in range(n):
        dist[v] = np.inf
        pos[v] = -1
    dist[src] = 0.0
    heap[0] = src
    pos[src] = 0
    size = 1
    while size > 0:
        u = heap[0]
        pos[u] = -1
        size -= 1
        if size > 0:
            moved = heap[size]
            heap[0] = moved
            pos[moved] = 0
            _sift_down(heap, pos, dist, size, 0)
        du = dist[u]
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if combine == COMBINE_ADD:
                nd = du + data[e]
            else:
                nd = du if du >= data[e] else data[e]
            # settled vertices never pass: their dist is already minimal
            if nd < dist[v]:
                dist[v] = nd
                if pos[v] == -1:
                    heap[size] = v
                    pos[v] = size
                    size += 1
                    _sift_up(heap, pos, dist, size - 1)
                else:
                    _sift_up(heap, pos, dist, pos[v])
    # self-distance is zero by definition, even for an isolated source
    dist[src] = 0.0


@njit(cache=True, parallel=True)
def shortest_paths(indptr, indices, data, active, combine):
    """Dense all-sources distance matrix; inactive sources stay all-inf."""
    n = indptr.shape[0] - 1
    out = np.full((n, n), np.inf)
    for s in prange(n):
        if active[s]:
            heap = np.empty(n, np.int32)
            pos = np.empty(n, np.int32)
            _dijkstra_row(indptr, indices, data, s, combine, out[s], heap, pos)
    return out
