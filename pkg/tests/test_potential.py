import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from formation_sim.exceptions import CoincidentWithObstacle, ValidationError
from formation_sim.potential import (
    ApfGains,
    Environment,
    attractive_force,
    detect_lmp,
    repulsive_force,
    resultant_force,
    srm_perturbation,
    total_repulsion,
)

REL = 1e-12
coords = st.floats(-20, 20, allow_nan=False)
vec = st.tuples(coords, coords)


def test_attraction_zero_at_target():
    assert np.array_equal(attractive_force((14, 14), (14, 14), 1.0), [0, 0])


def test_attraction_unit_step():
    np.testing.assert_allclose(attractive_force((13, 14), (14, 14), 1.0), [1, 0], rtol=REL)


def test_attraction_from_published_start():
    # 0.1 * (14 - (-4), 14 - (-1.5)) = (1.8, 1.55)
    np.testing.assert_allclose(attractive_force((-4, -1.5), (14, 14), 0.1), [1.8, 1.55], rtol=REL)


@given(vec, vec, vec, st.floats(0.01, 5))
def test_attraction_translation_covariant(q, t, c, eta):
    a = attractive_force(q, t, eta)
    b = attractive_force(np.add(q, c), np.add(t, c), eta)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_repulsion_outside_radius_is_zero():
    assert np.array_equal(repulsive_force((2, 1.5), (0, 1.5), 1.0, 1.0), [0, 0])


def test_repulsion_vanishes_on_boundary():
    assert np.array_equal(repulsive_force((1, 1.5), (0, 1.5), 1.0, 1.0), [0, 0])


def test_repulsion_hand_value():
    # rho = 0.5: 1 * (2 - 1) / 0.25 = 4 along +x
    np.testing.assert_allclose(repulsive_force((0.5, 1.5), (0, 1.5), 1.0, 1.0), [4, 0], rtol=REL)


def test_repulsion_singular_core_raises():
    with pytest.raises(CoincidentWithObstacle):
        repulsive_force((0, 0), (0, 0), 1.0, 1.0)
    with pytest.raises(CoincidentWithObstacle):
        repulsive_force((1e-7, 0), (0, 0), 1.0, 1.0)


def test_repulsion_continuous_at_boundary():
    k_r, rho_m = 3.0, 1.5
    f = repulsive_force((rho_m * (1 - 1e-8), 0), (0, 0), rho_m, k_r)
    assert np.linalg.norm(f) < 1e-6 * k_r


@given(st.floats(1e-5, 0.999), st.floats(1e-5, 0.999), st.floats(-math.pi, math.pi))
def test_repulsion_strictly_decreasing(r1, r2, theta):
    if abs(r1 - r2) < 1e-9:
        return
    d = np.array([math.cos(theta), math.sin(theta)])
    near, far = sorted([r1, r2])
    fn = np.linalg.norm(repulsive_force(near * d, (0, 0), 1.0, 1.0))
    ff = np.linalg.norm(repulsive_force(far * d, (0, 0), 1.0, 1.0))
    assert fn > ff


@given(vec, vec, st.floats(0.1, 5), st.floats(0.1, 5))
def test_repulsion_points_away(q, o, rho_m, k_r):
    if math.dist(q, o) < 1e-5 * rho_m:
        return
    f = repulsive_force(q, o, rho_m, k_r)
    assert f @ np.subtract(q, o) >= 0


def test_total_repulsion_far_from_everything():
    env = Environment([[10, 10]], 1.0, [20, 20])
    assert np.array_equal(total_repulsion(0, [(0, 0), (5, 0)], env, ApfGains(), 1.0), [0, 0])


def test_total_repulsion_single_obstacle():
    env = Environment([[0, 0]], 1.0, [20, 20])
    f = total_repulsion(0, [(0.5, 0), (9, 9)], env, ApfGains(k_r=1.0), 1.0)
    np.testing.assert_allclose(f, [4, 0], rtol=REL)


def test_total_repulsion_symmetric_pair_cancels():
    env = Environment([[0.5, 0], [-0.5, 0]], 1.0, [20, 20])
    f = total_repulsion(0, [(0, 0)], env, ApfGains(), 1.0)
    np.testing.assert_allclose(f, [0, 0], atol=1e-15)


def test_total_repulsion_counts_other_agents():
    env = Environment([], 1.0, [20, 20])
    f = total_repulsion(0, [(0, 0), (0.5, 0)], env, ApfGains(k_r=1.0), 1.0)
    np.testing.assert_allclose(f, [-4, 0], rtol=REL)


def test_total_repulsion_matches_pointwise_sum():
    env = Environment([[0.3, 0.2], [-0.4, 0.1], [5, 5]], 1.2, [20, 20])
    q = [(0.0, 0.0), (0.6, -0.5), (3, 3)]
    gains = ApfGains(k_r=2.0)
    expected = sum(repulsive_force(q[0], o, 1.2, 2.0) for o in env.obstacles)
    expected = expected + sum(repulsive_force(q[0], p, 0.9, 2.0) for p in q[1:])
    np.testing.assert_allclose(total_repulsion(0, q, env, gains, 0.9), expected, rtol=1e-13)


def test_total_repulsion_propagates_collision():
    env = Environment([[0, 0]], 1.0, [20, 20])
    with pytest.raises(CoincidentWithObstacle):
        total_repulsion(0, [(0, 0)], env, ApfGains(), 1.0)


@pytest.mark.parametrize(
    "a, b, expected",
    [((1, 0), (0, 1), (1, 1)), ((4, 0), (-4, 0), (0, 0)), ((1.8, 1.55), (0, 0), (1.8, 1.55))],
)
def test_resultant_force(a, b, expected):
    np.testing.assert_allclose(resultant_force(a, b), expected, rtol=REL)


def test_detect_lmp_zero_force_away_from_goal():
    assert detect_lmp((0, 0), 5.0, None, ApfGains())


def test_detect_lmp_not_when_arrived():
    assert not detect_lmp((0, 0), 0.01, None, ApfGains(eps_goal=0.5))


def test_detect_lmp_large_force_moving():
    window = [(0.1 * k, 0) for k in range(50)]
    assert not detect_lmp((0.5, 0), 5.0, window, ApfGains(eps_lmp=1e-3))


def test_detect_lmp_stall_window():
    gains = ApfGains(stall_window=5, stall_tol=1e-4)
    still = [(1.0, 1.0)] * 5
    assert detect_lmp((0.5, 0), 5.0, still, gains)
    # window not yet full
    assert not detect_lmp((0.5, 0), 5.0, still[:4], gains)


@given(vec, st.floats(0, 0.5), st.lists(vec, max_size=60))
def test_detect_lmp_never_at_goal(f, rho_t, window):
    assert not detect_lmp(f, rho_t, window, ApfGains(eps_goal=0.5))


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_srm_magnitude(seed, gamma):
    v = srm_perturbation(ApfGains(gamma_srm=gamma), np.random.default_rng(seed))
    assert math.isclose(np.linalg.norm(v), gamma, rel_tol=1e-15)


def test_srm_reproducible_and_fresh():
    g = ApfGains(gamma_srm=0.5)
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    a, b = srm_perturbation(g, r1), srm_perturbation(g, r2)
    assert np.array_equal(a, b)
    assert not np.array_equal(srm_perturbation(g, r1), a)


def test_srm_golden_value():
    rng = np.random.default_rng(12345)
    v = srm_perturbation(ApfGains(gamma_srm=0.5), rng)
    assert v.tolist() == [-0.0709605897798286, -0.4949389807825798]


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
def test_srm_gain_must_be_in_open_unit_interval(gamma):
    with pytest.raises(ValidationError):
        ApfGains(gamma_srm=gamma)


def test_environment_warns_when_target_inside_obstacle_disc():
    with pytest.warns(UserWarning):
        Environment([[0, 0]], 1.0, [0.5, 0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Environment([[0, 0]], 1.0, [5, 0])


def test_environment_rejects_non_positive_radius():
    with pytest.raises(ValidationError):
        Environment([], 0.0, [0, 0])
