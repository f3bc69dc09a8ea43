import numpy as np
import pytest

from smrec.graphs import DistanceGraph, EdgeListFormatError, ProximityGraph, load_proximity_edges


def test_from_edges_builds_symmetric_csr_with_loops():
    g = ProximityGraph.from_edges([10, 20, 30], [0], [2], [0.5])
    assert g.weight(0, 2) == g.weight(2, 0) == 0.5
    assert g.weight(0, 0) == 1.0 and g.weight(2, 2) == 1.0
    assert not g.has_loop(1)
    assert g.edge_count == 1
    g.validate()


def test_distance_graph_absent_is_infinite():
    d = DistanceGraph.from_edges([0, 1, 2], [0], [1], [2.0])
    assert np.isinf(d.weight(0, 2))
    assert d.weight(1, 1) == 0.0
    dense = d.to_dense()
    assert dense[2, 2] == 0.0  # diagonal is zero even for inactive vertices
    assert np.isinf(dense[0, 2])


def test_zero_distance_edges_survive_storage_and_dense():
    d = DistanceGraph.from_edges([0, 1], [0], [1], [0.0])
    assert d.weight(0, 1) == 0.0
    assert d.to_dense()[0, 1] == 0.0
    d.validate()


def test_from_edges_rejects_bad_input():
    with pytest.raises(ValueError, match="ascending"):
        ProximityGraph.from_edges([2, 1], [0], [1], [0.5])
    with pytest.raises(ValueError, match="self-loops"):
        ProximityGraph.from_edges([1, 2], [0], [0], [0.5])
    with pytest.raises(ValueError, match="duplicate"):
        ProximityGraph.from_edges([1, 2], [0, 0], [1, 1], [0.5, 0.6])
    with pytest.raises(ValueError, match="equal length"):
        ProximityGraph.from_edges([1, 2], [0], [1], [0.5, 0.6])


def test_validate_catches_weight_violations():
    g = ProximityGraph.from_edges([1, 2], [0], [1], [0.5])
    bad = ProximityGraph(labels=g.labels, indptr=g.indptr, indices=g.indices,
                         data=np.where(g.data == 0.5, 1.5, g.data))
    with pytest.raises(ValueError):
        bad.validate()
    d = DistanceGraph.from_edges([1, 2], [0], [1], [1.0])
    bad_d = DistanceGraph(labels=d.labels, indptr=d.indptr, indices=d.indices,
                          data=np.where(d.data == 1.0, -1.0, d.data))
    with pytest.raises(ValueError):
        bad_d.validate()


def test_validate_catches_asymmetry():
    g = ProximityGraph.from_edges([1, 2], [0], [1], [0.5])
    data = g.data.copy()
    data[np.flatnonzero((g.indices == 1))[0]] = 0.7  # one direction only
    with pytest.raises(ValueError, match="symmetric"):
        ProximityGraph(labels=g.labels, indptr=g.indptr, indices=g.indices, data=data).validate()


def test_dense_roundtrip_preserves_activity():
    g = ProximityGraph.from_edges([1, 2, 3], [0], [1], [0.25], active=[2])
    back = ProximityGraph.from_dense(g.labels, g.to_dense())
    assert back.allclose(g)
    assert back.has_loop(2)


def test_edge_list_parse_errors():
    with pytest.raises(EdgeListFormatError) as err:
        load_proximity_edges(iter(["1\t2\t0.5\n", "1\t2\n"]))
    assert err.value.line_no == 2
    with pytest.raises(EdgeListFormatError):
        load_proximity_edges(iter(["1\tx\t0.5\n"]))


def test_neighbors_view(rng):
    g = ProximityGraph.from_edges([0, 1, 2, 3], [0, 0, 1], [1, 2, 3], [0.3, 0.6, 0.9])
    nbrs, weights = g.neighbors(0)
    assert nbrs.tolist() == [0, 1, 2]
    assert weights.tolist() == [1.0, 0.3, 0.6]
