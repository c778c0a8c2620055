import itertools
import math

import numpy as np
import pytest

from depthsync.errors import ValidationError
from depthsync.graph import corruption_stats, make_erdos_renyi
from depthsync.l1mra import directional_derivative
from depthsync.manifold import SQRT2, angular_distance, geodesic_distance, random_rotation
from depthsync.dds import normalization_spread
from depthsync.scenario import (
    corrupt,
    corrupt_consistent,
    corrupt_random,
    generate_ground_truth,
    greedy_capped_edges,
    haar_values,
    load_scenario,
    make_scenario,
    max_pairwise_distance,
    save_scenario,
    spurious_fixture,
)


def good_edges_exact(s):
    g = s.graph
    for e, lab in enumerate(g.labels):
        if lab == "good":
            j, k = g.ej[e], g.ek[e]
            expected = s.ground_truth[j] @ s.ground_truth[k].T
            if np.max(np.abs(g.R[e] - expected)) > 1e-12:
                return False
    return True


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_zero_spread(dim):
    gt = generate_ground_truth(6, dim, 0.0, np.random.default_rng(0))
    for R in gt[1:]:
        np.testing.assert_allclose(R, gt[0], atol=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_spread_bounds(dim):
    rng = np.random.default_rng(1)
    for _ in range(20):
        rho = rng.uniform(0, math.pi / 2)
        gt = generate_ground_truth(15, dim, rho, rng)
        if dim == 2:
            # angular distance for SO(2), converted from the Frobenius one
            diam = max_pairwise_distance(np.swapaxes(gt, 1, 2)) / SQRT2
        else:
            diam = max_pairwise_distance(np.swapaxes(gt, 1, 2))
        assert diam <= 2 * rho + 1e-12
        s = make_scenario(15, dim, rho, rng)
        assert normalization_spread(s.init, s.ground_truth) <= 2 * rho + 1e-12 < math.pi + 1e-12
        assert s.init_in_small_ball


def test_spread_out_of_range():
    with pytest.raises(ValidationError):
        generate_ground_truth(3, 2, math.pi / 2, np.random.default_rng(0))


@pytest.mark.parametrize("fn", [corrupt_random, corrupt_consistent])
def test_alpha_zero_unchanged(fn):
    s = make_scenario(10, 3, 1.0, np.random.default_rng(2))
    t = fn(s, 0.0, np.random.default_rng(3))
    np.testing.assert_array_equal(t.graph.R, s.graph.R)
    assert t.graph.labels == s.graph.labels


@pytest.mark.parametrize("fn", [corrupt_random, corrupt_consistent])
def test_alpha_cap_respected(fn):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        alpha = rng.uniform(0, 0.5)
        s = fn(make_scenario(20, 2, 1.0, rng), alpha, rng)
        stats = corruption_stats(s.graph)
        assert stats.alpha0 <= alpha
        caps = [math.floor(alpha * nj + 1e-9) for nj, _, _ in stats.per_node]
        assert any(b == c for (_, b, _), c in zip(stats.per_node, caps))
        assert good_edges_exact(s)


def test_alpha_cap_on_sparse_graph():
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = make_erdos_renyi(25, 3, 0.3, rng)
        s = corrupt_random(make_scenario(25, 3, 1.0, rng, graph=g), 0.3, rng)
        assert corruption_stats(s.graph).alpha0 <= 0.3
        assert good_edges_exact(s)


def test_consistent_bad_edges_form_a_cocycle():
    rng = np.random.default_rng(5)
    s = corrupt_consistent(make_scenario(20, 3, 1.0, rng), 0.4, rng)
    g = s.graph
    bad = {(int(a), int(b)) for a, b, lab in zip(g.ej, g.ek, g.labels) if lab == "bad"}
    checked = 0
    for j, k, l in itertools.combinations(range(g.n), 3):
        if (j, k) in bad and (k, l) in bad and (j, l) in bad:
            cyc = g.measurement(j, k) @ g.measurement(k, l) @ g.measurement(l, j)
            np.testing.assert_allclose(cyc, np.eye(3), atol=1e-12)
            checked += 1
    assert checked > 0


def test_alpha_at_half_rejected():
    s = make_scenario(6, 2, 1.0, np.random.default_rng(6))
    with pytest.raises(ValidationError):
        corrupt_random(s, 0.5, np.random.default_rng(0))


def test_custom_selector_plugs_in():
    def first_edge_only(graph, alpha, rng):
        mask = np.zeros(graph.num_edges, dtype=bool)
        mask[0] = True
        return mask

    s = make_scenario(6, 2, 1.0, np.random.default_rng(7))
    t = corrupt(s, 0.2, np.random.default_rng(8), haar_values, "custom", first_edge_only)
    assert t.graph.labels.count("bad") == 1 and t.meta["model"] == "custom"


@pytest.mark.parametrize("model", ["random", "consistent"])
def test_deterministic_serialization(tmp_path, model):
    paths = []
    for i in range(2):
        rng = np.random.default_rng(123)
        s = make_scenario(12, 3, 1.0, rng, seed=123)
        s = (corrupt_random if model == "random" else corrupt_consistent)(s, 0.2, rng)
        p = tmp_path / f"s{i}.json"
        save_scenario(s, p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    back = load_scenario(paths[0])
    np.testing.assert_array_equal(back.graph.R, s.graph.R)
    np.testing.assert_array_equal(back.init, s.init)
    assert back.meta == s.meta


# --- spurious fixture ------------------------------------------------------------------------------

def test_fixture_basic_numbers():
    s = spurious_fixture(6, math.pi / 4)
    assert corruption_stats(s.graph).alpha0 == pytest.approx(1 / 5, abs=0)
    assert normalization_spread(s.init, s.ground_truth) == pytest.approx(math.pi / 4, abs=1e-15)
    assert good_edges_exact(s)


@pytest.mark.parametrize("n", [6, 8, 10])
def test_fixture_bad_estimate_value(n):
    theta, eps = math.pi / 4, 1e-3
    s = spurious_fixture(n, theta)
    h = n // 2
    from depthsync.manifold import angle_from_rotation

    z = angle_from_rotation(s.init)
    for j in range(h):
        k = j + h
        est = angle_from_rotation(s.graph.measurement(j, k)) + z[k]
        assert angular_distance(est, theta + eps) < 1e-15


@pytest.mark.parametrize("n", [6, 8, 10])
def test_fixture_derivatives_nonnegative(n):
    s = spurious_fixture(n, math.pi / 4)
    for j in range(n):
        for v in (1, -1):
            assert directional_derivative(j, v, s.init, s.graph) >= 0


def test_fixture_preconditions():
    with pytest.raises(ValidationError):
        spurious_fixture(5, 0.5)
    with pytest.raises(ValidationError):
        spurious_fixture(6, 2.0)
