"""Lattice geometry: neighborhoods, wrapping, symmetry invariants."""

import numpy as np
import pytest

from sgflm.lattice import build_lattice, lattice_from_spec, neighbor_sum


def test_torus_four_nearest_regular_degree():
    lat = build_lattice(20, 20, True, "four_nearest")
    assert np.all(lat.degree == 4)
    for i in range(lat.n_sites):
        nbrs = lat.neighbor_list(i)
        assert len(set(nbrs.tolist())) == 4
        assert i not in nbrs


def test_small_torus_wraparound_neighbors():
    lat = build_lattice(3, 3, True, "four_nearest")
    # site 0 is (0,0); wrapped neighbors are (0,1)=1, (0,2)=2, (1,0)=3, (2,0)=6
    assert set(lat.neighbor_list(0).tolist()) == {1, 2, 3, 6}


def test_free_boundary_corner_degree():
    lat = build_lattice(4, 4, False, "four_nearest")
    for corner in (0, 3, 12, 15):
        assert lat.degree[corner] == 2


def test_eight_nearest_torus_degree():
    lat = build_lattice(5, 4, True, "eight_nearest")
    assert np.all(lat.degree == 8)


def test_rejects_small_torus():
    with pytest.raises(ValueError):
        build_lattice(2, 5, True, "four_nearest")


def test_rejects_zero_dimensions():
    with pytest.raises(ValueError):
        build_lattice(0, 5, False, "four_nearest")


def test_rejects_unknown_kind():
    with pytest.raises(ValueError):
        build_lattice(4, 4, False, "hexagonal")


class TestNeighborSum:
    def test_all_ones_four_nearest(self):
        lat = build_lattice(5, 5, True, "four_nearest")
        assert neighbor_sum(lat, np.ones(25), 7) == pytest.approx(4.0)

    def test_all_zeros(self):
        lat = build_lattice(5, 5, True, "four_nearest")
        assert neighbor_sum(lat, np.zeros(25), 0) == 0.0

    def test_hand_enumeration_on_3x3(self):
        lat = build_lattice(3, 3, True, "four_nearest")
        values = np.arange(9, dtype=float)
        # neighbors of site 0 are 1, 2, 3, 6
        assert neighbor_sum(lat, values, 0) == pytest.approx(12.0)

    def test_index_out_of_range(self):
        lat = build_lattice(3, 3, True, "four_nearest")
        with pytest.raises(IndexError):
            neighbor_sum(lat, np.ones(9), 9)

    def test_rejects_wrong_length(self):
        lat = build_lattice(3, 3, True, "four_nearest")
        with pytest.raises(ValueError):
            neighbor_sum(lat, np.ones(8), 0)


@pytest.mark.parametrize("rows,cols", [(3, 3), (3, 7), (5, 4), (25, 25)])
@pytest.mark.parametrize("wrap", [True, False])
@pytest.mark.parametrize("kind", ["four_nearest", "eight_nearest"])
def test_symmetry_and_irreflexivity(rows, cols, wrap, kind):
    lat = build_lattice(rows, cols, wrap, kind)
    neighbor_sets = [set(lat.neighbor_list(i).tolist()) for i in range(lat.n_sites)]
    for i, nbrs in enumerate(neighbor_sets):
        assert i not in nbrs
        for j in nbrs:
            assert i in neighbor_sets[j]


def test_adjacency_matches_neighbor_lists():
    lat = build_lattice(4, 6, True, "four_nearest")
    W = lat.adjacency().toarray()
    np.testing.assert_array_equal(W, W.T)
    np.testing.assert_array_equal(W.sum(axis=1), lat.degree)
    for i in range(lat.n_sites):
        assert set(np.flatnonzero(W[i]).tolist()) == set(lat.neighbor_list(i).tolist())


def test_spec_round_trip():
    lat = build_lattice(4, 5, True, "eight_nearest")
    again = lattice_from_spec(lat.spec())
    np.testing.assert_array_equal(again.neighbors, lat.neighbors)
    assert again.spec() == lat.spec()
