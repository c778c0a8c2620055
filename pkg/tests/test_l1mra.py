import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from depthsync.errors import ValidationError
from depthsync.graph import corruption_stats
from depthsync.l1mra import (
    coordinate_energy,
    directional_derivative,
    gd_l1_run,
    gd_l1_update_node,
    is_coordinatewise_fixed,
    l1_energy,
    partition,
)
from depthsync.manifold import angular_distance, wrap_angle
from depthsync.problem import angles_of, so2_spread
from depthsync.scenario import corrupt_random, make_scenario, spurious_fixture

from helpers import so2_graph, star_scenario


def brute_energy(theta, g):
    """Oracle: edge loop over complex numbers."""
    z = np.exp(1j * np.asarray(theta))
    total = 0.0
    for e in range(g.num_edges):
        j, k = g.ej[e], g.ek[e]
        zjk = g.R[e, 0, 0] + 1j * g.R[e, 1, 0]
        total += abs(np.angle(z[j] * np.conj(zjk * z[k])))
    return total


# --- energies -------------------------------------------------------------------------------------

def test_energy_zero_at_ground_truth():
    s = make_scenario(10, 2, 1.0, np.random.default_rng(0))
    assert l1_energy(s.ground_truth, s.graph) < 1e-13


def test_single_edge_energy():
    g = so2_graph(2, [(0, 1)], [0.6])
    assert l1_energy(np.zeros(2), g) == pytest.approx(0.6, abs=1e-15)
    assert l1_energy(np.array([0.6, 0.0]), g) == pytest.approx(0.0, abs=1e-15)


def test_energy_matches_oracle_and_coordinate_sum():
    rng = np.random.default_rng(1)
    for _ in range(10):
        s = corrupt_random(make_scenario(9, 2, 1.2, rng), 0.3, rng)
        theta = rng.uniform(-math.pi, math.pi, 9)
        E = l1_energy(theta, s.graph)
        assert E == pytest.approx(brute_energy(theta, s.graph), abs=1e-12)
        coord = sum(coordinate_energy(j, theta[j], theta, s.graph) for j in range(9))
        # every edge is counted once from each endpoint
        assert coord == pytest.approx(2 * E, abs=1e-12)


def test_coordinate_energy_examples():
    a = 0.35
    s = star_scenario([-a, 0.0, a])
    assert coordinate_energy(0, 0.0, angles_of(s.init), s.graph) == pytest.approx(2 * a, abs=1e-15)
    s = star_scenario([0.3, 0.3])
    assert coordinate_energy(0, 0.3, angles_of(s.init), s.graph) == pytest.approx(0.0, abs=1e-15)


def test_energy_rejects_so3():
    s = make_scenario(4, 3, 0.5, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        l1_energy(s.init, s.graph)


# --- derivatives ----------------------------------------------------------------------------------

def test_derivative_count_example():
    s = star_scenario([0.1, 0.2, 0.3, -0.1])
    z = angles_of(s.init)
    assert directional_derivative(0, 1, z, s.graph) == -2
    assert directional_derivative(0, -1, z, s.graph) == 2
    p = partition(0, z, s.graph)
    assert p.c_plus == {1, 2, 3} and p.c_minus == {4} and not p.c_zero and not p.cut


def test_derivative_at_consensus():
    # each estimate sitting on z_j adds one unit of slope either way
    s = star_scenario([0.0, 0.0, 0.0])
    z = angles_of(s.init)
    assert directional_derivative(0, 1, z, s.graph) == 3
    assert directional_derivative(0, -1, z, s.graph) == 3


def test_derivative_with_cut_points():
    s = star_scenario([math.pi, 0.5, -0.5])
    z = angles_of(s.init)
    assert partition(0, z, s.graph).cut == {1}
    assert directional_derivative(0, 1, z, s.graph) == -1
    assert directional_derivative(0, -1, z, s.graph) == -1


def test_derivative_rejects_bad_direction():
    s = star_scenario([0.1])
    with pytest.raises(ValidationError):
        directional_derivative(0, 0, angles_of(s.init), s.graph)


@settings(max_examples=60, deadline=None)
@given(offsets=st.lists(st.floats(-3.1, 3.1), min_size=1, max_size=9), v=st.sampled_from([1, -1]))
def test_derivative_matches_finite_difference(offsets, v):
    s = star_scenario(offsets)
    z = angles_of(s.init)
    h = 1e-7
    # finite differences are only valid away from breakpoints
    kinks = np.concatenate([offsets, wrap_angle(np.asarray(offsets) + math.pi)])
    if np.min(angular_distance(kinks, 0.0)) < 1e-5:
        return
    f0 = coordinate_energy(0, 0.0, z, s.graph)
    f1 = coordinate_energy(0, v * h, z, s.graph)
    fd = (f1 - f0) / h
    d = directional_derivative(0, v, z, s.graph)
    assert abs(fd - d) <= 1e-4 * max(1.0, abs(d))


# --- updates --------------------------------------------------------------------------------------

@pytest.mark.parametrize("phi", [0.7, -1.3, 3.0])
def test_single_neighbor_update(phi):
    s = star_scenario([phi])
    theta = gd_l1_update_node(0, s.init, s.graph)
    assert theta[0] == pytest.approx(phi, abs=1e-15)


def test_update_stops_at_median_breakpoint():
    s = star_scenario([0.1, 0.2, 0.9])
    theta = gd_l1_update_node(0, s.init, s.graph)
    assert theta[0] == pytest.approx(0.2, abs=1e-15)
    np.testing.assert_array_equal(theta[1:], 0.0)


@pytest.mark.parametrize("n", [6, 8])
def test_fixture_nodes_unchanged(n):
    s = spurious_fixture(n, math.pi / 4)
    z = angles_of(s.init)
    for j in range(n):
        np.testing.assert_array_equal(gd_l1_update_node(j, z, s.graph), z)


def test_fixed_point_detection():
    s = make_scenario(8, 2, 1.0, np.random.default_rng(2))
    assert is_coordinatewise_fixed(s.ground_truth, s.graph) == (True, [])
    f = spurious_fixture(6, math.pi / 4)
    fixed, bad = is_coordinatewise_fixed(f.init, f.graph)
    assert fixed and bad == []
    assert so2_spread(angles_of(f.init), angles_of(f.ground_truth))[0] == pytest.approx(math.pi / 4)
    s = star_scenario([0.1, 0.2, 0.3, -0.1])
    fixed, bad = is_coordinatewise_fixed(s.init, s.graph)
    assert not fixed and 0 in bad


def test_fixture_run_stays_put():
    s = spurious_fixture(6, math.pi / 4)
    _, trace = gd_l1_run(s, max_epochs=100, stop_on_fixed=False)
    assert trace.extra["coordinatewise_fixed_at_init"] is True
    assert trace.epochs == 100
    np.testing.assert_allclose(trace.deltas(), math.pi / 4, atol=1e-15)


def test_clean_run_recovers():
    rng = np.random.default_rng(3)
    for _ in range(5):
        s = make_scenario(10, 2, 1.0, rng)
        _, trace = gd_l1_run(s)
        assert trace.final_delta < 1e-12 and trace.status == "Converged"


def _replay(s):
    """Per-iteration (energy, delta) over full cyclic epochs until fixed."""
    g = s.graph
    z = angles_of(s.init)
    gt = angles_of(s.ground_truth)
    E = [l1_energy(z, g)]
    D = [so2_spread(z, gt)[0]]
    changed = []
    for _ in range(200):
        moved = False
        for j in range(g.n):
            new = gd_l1_update_node(j, z, g)
            changed.append(bool(new[j] != z[j]))
            moved |= changed[-1]
            z = new
            E.append(l1_energy(z, g))
            D.append(so2_spread(z, gt)[0])
        if not moved:
            break
    return np.array(E), np.array(D), np.array(changed)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.sampled_from([0.1, 0.2, 0.3, 0.45]))
def test_energy_decreases_and_delta_stays_bounded(seed, alpha):
    rng = np.random.default_rng(seed)
    s = corrupt_random(make_scenario(11, 2, 1.4, rng), alpha, rng)
    assert corruption_stats(s.graph).alpha0 < 0.5
    E, D, changed = _replay(s)
    dE = np.diff(E)
    assert np.all(dE[changed] < -1e-12) or not changed.any()
    assert np.all(dE[~changed] == 0)
    assert np.all(np.diff(D) <= 1e-12)


def test_run_trace_energy_matches_replay():
    rng = np.random.default_rng(4)
    s = corrupt_random(make_scenario(9, 2, 1.0, rng), 0.3, rng)
    _, trace = gd_l1_run(s)
    E, _, _ = _replay(s)
    np.testing.assert_allclose([trace.init_energy] + trace.energies, E[:len(trace.energies) + 1],
                               atol=1e-12)


# --- the update map is not closed -----------------------------------------------------------------

def _non_closed_update(z):
    g = so2_graph(6, [(0, k) for k in range(1, 6)], [0.0] * 5)
    return gd_l1_update_node(0, z, g)[0]


def test_update_map_is_not_closed():
    c = 1.0
    for l in (10, 100, 1000):
        z = np.angle(np.array([1, np.exp(1j * c), np.exp(1j * c), np.exp(-1j * c),
                               -np.exp(1j / l), -np.exp(1j / l)]))
        assert _non_closed_update(z) == pytest.approx(-c, abs=1e-12)
    limit = np.angle(np.array([1, np.exp(1j * c), np.exp(1j * c), np.exp(-1j * c), -1, -1]))
    assert _non_closed_update(limit) == pytest.approx(c, abs=1e-12)
