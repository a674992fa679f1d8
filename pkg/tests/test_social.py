"""Social soft attention: kernel oracles, invariances, and normalizations."""

import math

import numpy as np
import pytest

from ssagcn.rng import Rng
from ssagcn.social import (SsaConfig, attention_to_csv, pair_geometry,
                           ssa_matrix, ssa_weight, symmetric_normalize,
                           uniform_adjacency)


def closed_form(p_i, u_i, p_j, u_j):
    """(u_i - u_j) . (p_j - p_i) / l^2, clamped at zero."""
    rel = np.asarray(p_j) - np.asarray(p_i)
    dv = np.asarray(u_i) - np.asarray(u_j)
    l2 = max(float(rel @ rel), 1e-6 ** 2)
    return max(0.0, float(dv @ rel) / l2)


def random_pairs(n, seed=0):
    rng = Rng(seed)
    for _ in range(n):
        yield (rng.uniform(-5, 5, 2), rng.uniform(-1, 1, 2),
               rng.uniform(-5, 5, 2), rng.uniform(-1, 1, 2))


def test_angle_form_matches_closed_form():
    for p_i, u_i, p_j, u_j in random_pairs(10_000):
        w = ssa_weight(pair_geometry(p_i, u_i, p_j, u_j))
        assert abs(w - closed_form(p_i, u_i, p_j, u_j)) < 1e-9


def test_raw_matrix_symmetric():
    rng = Rng(1)
    pos = rng.uniform(-3, 3, (6, 2))
    vel = rng.uniform(-1, 1, (6, 2))
    raw = ssa_matrix(pos, vel).raw
    assert np.allclose(raw, raw.T, atol=1e-12)


def test_receding_pairs_exactly_zero():
    # agents moving directly apart
    g = pair_geometry((0, 0), (-1, 0), (2, 0), (1, 0))
    assert ssa_weight(g) == 0.0


def test_head_on_unit_speed_at_unit_distance():
    g = pair_geometry((0, 0), (0.5, 0), (1, 0), (-0.5, 0))
    assert abs(ssa_weight(g) - 1.0) < 1e-12


def test_follower_weight_hand_value():
    # follower closing on a slower leader one unit ahead:
    # (u_i - u_j).(p_j - p_i)/l^2 = (1.5, 0).(1, 0)/1 = 1.5
    g = pair_geometry((0, 0), (2.0, 0), (1, 0), (0.5, 0))
    assert abs(ssa_weight(g) - 1.5) < 1e-12


def test_zero_speed_cosines_default_to_zero():
    g = pair_geometry((0, 0), (0, 0), (1, 0), (0, 0))
    assert g.cos_alpha == 0.0 and g.cos_beta == 0.0
    assert ssa_weight(g) == 0.0


def test_coincident_agents_distance_floor():
    g = pair_geometry((1, 1), (1, 0), (1, 1), (-1, 0))
    assert g.distance == SsaConfig().epsilon_dist
    assert math.isfinite(ssa_weight(g))


def test_diagonal_carries_theta():
    pos = np.array([[0.0, 0.0], [2.0, 0.0]])
    vel = np.array([[1.0, 0.0], [-1.0, 0.0]])
    m = ssa_matrix(pos, vel, SsaConfig(theta=0.07))
    assert np.allclose(np.diag(m.raw), 0.07)


def test_rows_softmax_normalized():
    rng = Rng(2)
    m = ssa_matrix(rng.uniform(-3, 3, (5, 2)), rng.uniform(-1, 1, (5, 2)))
    assert np.allclose(m.normalized.sum(axis=1), 1.0)
    # softmax of the raw row reproduces the normalized row
    e = np.exp(m.raw - m.raw.max(axis=1, keepdims=True))
    assert np.allclose(m.normalized, e / e.sum(axis=1, keepdims=True))


def test_softmax_two_agent_hand_values():
    # raw row [0.1, 1.0] -> softmax = [0.28905, 0.71095] (5 decimals)
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    vel = np.array([[0.5, 0.0], [-0.5, 0.0]])
    m = ssa_matrix(pos, vel)  # off-diagonal weight 1.0, theta 0.1
    assert abs(m.raw[0, 1] - 1.0) < 1e-12
    assert abs(m.normalized[0, 0] - 0.28905) < 1e-5
    assert abs(m.normalized[0, 1] - 0.71095) < 1e-5


# invariance suite ---------------------------------------------------------


def _random_scene(seed):
    rng = Rng(seed)
    return rng.uniform(-4, 4, (5, 2)), rng.uniform(-1, 1, (5, 2))


def test_invariance_translation():
    pos, vel = _random_scene(3)
    a = ssa_matrix(pos, vel).raw
    b = ssa_matrix(pos + np.array([10.0, -7.0]), vel).raw
    assert np.allclose(a, b, atol=1e-9)


def test_invariance_rotation():
    pos, vel = _random_scene(4)
    th = 1.1
    r = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    a = ssa_matrix(pos, vel).raw
    b = ssa_matrix(pos @ r.T, vel @ r.T).raw
    assert np.allclose(a, b, atol=1e-9)


def test_invariance_common_velocity_offset():
    pos, vel = _random_scene(5)
    a = ssa_matrix(pos, vel).raw
    b = ssa_matrix(pos, vel + np.array([0.7, -0.3])).raw
    assert np.allclose(a, b, atol=1e-9)


def test_invariance_uniform_scaling():
    # kernel ~ velocity * distance / distance^2: scaling positions and
    # velocities together scales numerator and denominator identically
    pos, vel = _random_scene(6)
    a = ssa_matrix(pos, vel).raw
    b = ssa_matrix(3.0 * pos, 3.0 * vel).raw
    off = ~np.eye(5, dtype=bool)
    assert np.allclose(a[off], b[off], atol=1e-9)


# factor masks -------------------------------------------------------------


def test_factor_masks():
    g = pair_geometry((0, 0), (2.0, 0), (2, 0), (-1.0, 0))
    # speeds 2 and 1, cosines 1 and 1, distance 2
    assert abs(ssa_weight(g, SsaConfig()) - 1.5) < 1e-12
    assert abs(ssa_weight(g, SsaConfig(use_speed=False)) - 1.0) < 1e-12
    assert abs(ssa_weight(g, SsaConfig(use_direction=False)) - 1.5) < 1e-12
    assert abs(ssa_weight(g, SsaConfig(use_distance=False)) - 3.0) < 1e-12
    assert abs(ssa_weight(g, SsaConfig(use_speed=False, use_direction=False,
                                       use_distance=False)) - 1.0) < 1e-12
    assert abs(ssa_weight(g, SsaConfig(use_speed=False, use_direction=False)) - 0.5) < 1e-12


# graph normalizations -----------------------------------------------------


def test_symmetric_normalize_oracle():
    a = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    a_hat = a + np.eye(3)
    d = np.diag(1.0 / np.sqrt(a_hat.sum(axis=1)))
    assert np.allclose(symmetric_normalize(a), d @ a_hat @ d, atol=1e-12)


def test_symmetric_normalize_rejects_non_square():
    with pytest.raises(ValueError):
        symmetric_normalize(np.ones((2, 3)))


def test_uniform_adjacency_two_agents():
    assert np.allclose(uniform_adjacency(2), np.full((2, 2), 0.5))


def test_uniform_adjacency_row_sums():
    m = uniform_adjacency(5)
    assert np.allclose(m, m.T)
    assert np.allclose(m.sum(axis=1), 1.0)


def test_attention_csv_shape():
    rng = Rng(7)
    m = ssa_matrix(rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (3, 2)))
    text = attention_to_csv(m)
    rows = [r.split(",") for r in text.strip().split("\n")]
    assert len(rows) == 3 and all(len(r) == 3 for r in rows)
