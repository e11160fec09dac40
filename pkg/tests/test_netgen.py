import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlmcexp.errors import ConfigurationError
from mlmcexp.netgen import GraphSpec, degrees, pref, smallw


def _check_adjacency(a):
    d = a.to_dense()
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert set(np.unique(d)) <= {0.0, 1.0}


def test_ring_lattice_degrees():
    assert np.all(degrees(smallw(50, k=2, p=0.0)) == 4)
    assert np.all(degrees(smallw(50, k=3, p=0.0)) == 6)


def test_shortcuts_add_edges():
    a = smallw(2000, p=0.1, seed=1)
    extra = degrees(a).sum() / 2 - 2 * 2000
    assert 150 < extra < 250


@given(st.integers(5, 60), st.integers(1, 2), st.floats(0, 1), st.integers(0, 2**32))
def test_smallw_is_simple_symmetric(n, k, p, seed):
    a = smallw(n, k, p, seed)
    _check_adjacency(a)
    assert degrees(a).min() >= 2 * k


@given(st.integers(3, 60), st.integers(1, 3), st.integers(0, 2**32))
def test_pref_is_simple_symmetric(n, d, seed):
    if n < d + 1:
        return
    a = pref(n, d, seed)
    _check_adjacency(a)
    expected_edges = d * (d - 1) // 2 + d * (n - d)
    assert degrees(a).sum() == 2 * expected_edges


def test_pref_seed_clique_is_complete():
    assert np.array_equal(pref(3, 2).to_dense(), np.ones((3, 3)) - np.eye(3))
    assert np.array_equal(pref(5, 4).to_dense(), np.ones((5, 5)) - np.eye(5))


def test_determinism():
    assert smallw(500, seed=9) == smallw(500, seed=9)
    assert pref(500, seed=9) == pref(500, seed=9)
    assert smallw(500, seed=9) != smallw(500, seed=10)


def test_pref_degree_tail():
    deg = degrees(pref(100_000, 2, seed=0))
    ks = np.arange(4, 200)
    ccdf = np.array([(deg >= k).mean() for k in ks])
    slope = np.polyfit(np.log(ks), np.log(ccdf), 1)[0]
    # pdf ~ k^-gamma gives a CCDF slope of 1 - gamma
    assert abs((1 - slope) - 3.0) <= 0.5
    assert deg.max() > 100


@pytest.mark.slow
def test_smallw_million_nodes_has_small_max_degree():
    assert degrees(smallw(1_000_000, seed=0)).max() <= 10


def test_graph_spec_validation():
    with pytest.raises(ConfigurationError):
        GraphSpec("tree", 10)
    with pytest.raises(ConfigurationError):
        GraphSpec("smallw", 2)
    with pytest.raises(ConfigurationError):
        GraphSpec("smallw", 10, p=1.5)
    with pytest.raises(ConfigurationError):
        GraphSpec("pref", 10, d=0)
    with pytest.raises(ConfigurationError):
        smallw(4, k=2)
    assert GraphSpec("pref", 10, d=2, seed=1).build() == pref(10, 2, 1)
