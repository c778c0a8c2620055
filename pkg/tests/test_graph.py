import itertools
import math

import numpy as np
import pytest

from depthsync.errors import DisconnectedError, TooLargeError, UnknownLabelsError, ValidationError
from depthsync.graph import (
    MeasurementGraph,
    corruption_stats,
    graph_from_edges,
    is_well_connected,
    load_graph,
    make_complete,
    make_erdos_renyi,
    neighborhoods,
    save_graph,
    violates_well_connectedness,
)
from depthsync.manifold import random_rotation
from depthsync.scenario import spurious_fixture


def brute_well_connected(n, edges):
    """Oracle straight from the definition, over itertools subsets."""
    nbrs = {v: set() for v in range(n)}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    for size in range(1, n // 2 + 1):
        for J in itertools.combinations(range(n), size):
            Js = set(J)
            if not any(len(nbrs[j] - Js) > len(nbrs[j] & Js) for j in J):
                return False
    return True


def labeled(n, edges, labels):
    g = graph_from_edges(n, 2, edges)
    return g.replace(labels=tuple(labels))


def two_bridged_cliques():
    a = list(itertools.combinations(range(4), 2))
    b = list(itertools.combinations(range(4, 8), 2))
    return graph_from_edges(8, 2, a + b + [(3, 4)])


# small graphs standing in for the n = 4, 5, 6 well-connected examples
K4_MINUS_EDGE = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]
WHEEL_5 = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1), (4, 2), (4, 3)]
STAR_6 = [(0, k) for k in range(1, 6)]
OCTAHEDRON = [(i, j) for i, j in itertools.combinations(range(6), 2) if j != i + 3]


def test_neighborhoods_complete_clean():
    g = make_complete(4, 2).replace(labels=("good",) * 6)
    everything, good, bad = neighborhoods(g, 0)
    assert everything == {1, 2, 3} and good == {1, 2, 3} and bad == set()


def test_neighborhoods_split():
    g = labeled(3, [(0, 1), (0, 2)], ["bad", "good"])
    everything, good, bad = neighborhoods(g, 0)
    assert good == {2} and bad == {1} and everything == {1, 2}


def test_neighborhoods_unlabeled():
    g = make_complete(4, 2)
    assert neighborhoods(g, 1, split=False) == {0, 2, 3}
    with pytest.raises(UnknownLabelsError):
        neighborhoods(g, 1)


def test_partition_property():
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = make_erdos_renyi(12, 2, 0.4, rng)
        g = g.replace(labels=tuple(rng.choice(["good", "bad"], size=g.num_edges)))
        for j in range(g.n):
            everything, good, bad = neighborhoods(g, j)
            assert good | bad == everything and not good & bad


def test_corruption_stats():
    g = make_complete(5, 2).replace(labels=("good",) * 10)
    assert corruption_stats(g).alpha0 == 0
    labels = ["bad" if (j, k) == (0, 1) else "good" for j, k in zip(g.ej, g.ek)]
    g = g.replace(labels=tuple(labels))
    stats = corruption_stats(g)
    assert stats.alpha0 == 0.25
    assert stats.per_node[0] == (4, 1, 0.25)
    with pytest.raises(UnknownLabelsError):
        corruption_stats(make_complete(3, 2))


@pytest.mark.parametrize("n", [6, 8, 10])
def test_fixture_alpha0(n):
    assert corruption_stats(spurious_fixture(n, math.pi / 4).graph).alpha0 == 1 / (n - 1)


# --- well-connectedness --------------------------------------------------------------------------

@pytest.mark.parametrize("n", range(2, 13))
def test_complete_graphs_are_well_connected(n):
    assert is_well_connected(make_complete(n, 2)).verdict is True


@pytest.mark.parametrize("n,edges", [(4, K4_MINUS_EDGE), (5, WHEEL_5), (6, STAR_6)])
def test_small_examples_are_well_connected(n, edges):
    assert brute_well_connected(n, edges)
    assert is_well_connected(graph_from_edges(n, 2, edges)).verdict is True


def test_octahedron_is_not_well_connected():
    # J = {0, 1, 2}: every member has two neighbors inside and two outside
    g = graph_from_edges(6, 2, OCTAHEDRON)
    assert violates_well_connectedness(g, (0, 1, 2))
    assert is_well_connected(g).verdict is False


def test_cycle_is_not_well_connected():
    edges = [(i, (i + 1) % 6) for i in range(6)]
    wc = is_well_connected(graph_from_edges(6, 2, edges))
    assert wc.verdict is False and not brute_well_connected(6, edges)


def test_bridged_cliques():
    g = two_bridged_cliques()
    wc = is_well_connected(g)
    assert wc.verdict is False
    assert set(wc.witness) <= set(range(4)) or set(wc.witness) <= set(range(4, 8))
    assert violates_well_connectedness(g, wc.witness)
    assert violates_well_connectedness(g, range(4))


def test_exhaustive_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(60):
        n = int(rng.integers(2, 10))
        g = make_erdos_renyi(n, 2, float(rng.uniform(0.3, 1.0)), rng)
        edges = list(zip(g.ej.tolist(), g.ek.tolist()))
        wc = is_well_connected(g)
        assert wc.verdict == brute_well_connected(n, edges)
        if wc.verdict is False:
            assert violates_well_connectedness(g, wc.witness)
            assert 1 <= len(wc.witness) <= n // 2


def test_sampled_agrees_with_exhaustive():
    rng = np.random.default_rng(2)
    for _ in range(30):
        g = make_erdos_renyi(10, 2, 0.35, rng)
        s = is_well_connected(g, "sampled", trials=2000, rng=rng)
        if s.verdict is False:
            assert violates_well_connectedness(g, s.witness)
            assert is_well_connected(g).verdict is False
        else:
            assert s.verdict is None
    assert is_well_connected(two_bridged_cliques(), "sampled", trials=5000, rng=rng).verdict is False


def test_exhaustive_too_large():
    with pytest.raises(TooLargeError):
        is_well_connected(make_complete(25, 2))


# --- generators ----------------------------------------------------------------------------------

def test_make_complete_edges():
    g = make_complete(5, 2)
    assert g.num_edges == 10 and g.is_complete()
    assert all(lab == "unknown" for lab in g.labels)


def test_erdos_renyi_full_probability():
    g = make_erdos_renyi(7, 3, 1.0, np.random.default_rng(3))
    assert g.is_complete()


def test_erdos_renyi_edge_count():
    rng = np.random.default_rng(4)
    n, p = 50, 0.3
    N = n * (n - 1) / 2
    sigma = math.sqrt(N * p * (1 - p))
    for _ in range(20):
        assert abs(make_erdos_renyi(n, 2, p, rng).num_edges - p * N) < 4 * sigma


def test_erdos_renyi_disconnected():
    with pytest.raises(DisconnectedError):
        make_erdos_renyi(30, 2, 0.01, np.random.default_rng(5), max_attempts=5)
    with pytest.raises(ValidationError):
        make_erdos_renyi(5, 2, 0.0, np.random.default_rng(5))


# --- validation and IO -----------------------------------------------------------------------------

def test_reverse_measurement_is_transpose():
    rng = np.random.default_rng(6)
    R = random_rotation(3, rng)
    g = MeasurementGraph(2, 3, [1], [0], [R], ["good"])
    assert (g.ej[0], g.ek[0]) == (0, 1)
    np.testing.assert_array_equal(g.measurement(1, 0), R)
    np.testing.assert_array_equal(g.measurement(0, 1), R.T)


def test_invalid_graphs_rejected():
    I = np.eye(2)
    with pytest.raises(ValidationError):
        MeasurementGraph(2, 2, [0], [0], [I], ["good"])
    with pytest.raises(ValidationError):
        MeasurementGraph(3, 2, [0, 1, 0], [1, 0, 2], [I, I, I], ["good"] * 3)
    with pytest.raises(ValidationError):
        MeasurementGraph(2, 2, [0], [1], [np.diag([1.0, -1.0])], ["good"])
    with pytest.raises(ValidationError):
        MeasurementGraph(2, 2, [0], [1], [I], ["maybe"])
    with pytest.raises(DisconnectedError):
        MeasurementGraph(4, 2, [0, 2], [1, 3], [I, I], ["good"] * 2)


def test_graph_is_immutable():
    g = make_complete(3, 2)
    with pytest.raises(ValueError):
        g.R[0, 0, 0] = 2.0


def test_json_round_trip_and_byte_stability(tmp_path):
    rng = np.random.default_rng(7)
    g = make_erdos_renyi(8, 3, 0.6, rng)
    R = np.array([random_rotation(3, rng) for _ in range(g.num_edges)])
    g = g.replace(R=R, labels=tuple(rng.choice(["good", "bad"], size=g.num_edges)))
    save_graph(g, tmp_path / "a.json")
    h = load_graph(tmp_path / "a.json")
    np.testing.assert_array_equal(h.R, g.R)
    assert h.labels == g.labels
    save_graph(h, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_loader_rejects_disconnected(tmp_path):
    p = tmp_path / "g.json"
    I = [1, 0, 0, 1]
    p.write_text('{"n": 4, "D": 2, "edges": [{"j": 0, "k": 1, "R": %s, "label": "good"},'
                 ' {"j": 2, "k": 3, "R": %s, "label": "good"}]}' % (I, I))
    with pytest.raises(DisconnectedError):
        load_graph(p)
