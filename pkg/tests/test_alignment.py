import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latalign.alignment import (AlignmentConfig, align_epsilon, align_epsilon_scaled, align_input, align_pred_x0,
                                beta_at, effective_beta, is_active, parse_bool)
from latalign.schedule import forward_diffuse

from conftest import grid_pairs, unit

T = 1000


def test_beta_laws():
    assert beta_at(T, T, AlignmentConfig(beta_law="linear", beta_value=1.0)) == 1.0
    assert beta_at(0, T, AlignmentConfig(beta_law="linear", beta_value=1.0)) == 0.0
    assert beta_at(250, T, AlignmentConfig(beta_law="linear", beta_value=0.4)) == pytest.approx(0.1)
    for t in (0, 1, 500, 1000):
        assert beta_at(t, T, AlignmentConfig(beta_law="constant", beta_value=0.3)) == 0.3


@given(st.integers(0, T), unit, st.sampled_from(["constant", "linear"]))
def test_beta_in_unit_interval(t, b, law):
    assert 0.0 <= beta_at(t, T, AlignmentConfig(beta_law=law, beta_value=b)) <= 1.0


def test_gate():
    cfg = AlignmentConfig(K=200)
    assert is_active(201, cfg) and not is_active(200, cfg)
    assert not is_active(900, AlignmentConfig(mode="none"))
    assert effective_beta(100, T, cfg) == 0.0 and effective_beta(300, T, cfg) == 0.3


def test_scalar_examples():
    one, three = np.array([1.0]), np.array([3.0])
    np.testing.assert_allclose(align_input(one, three, 10, 0, 0.25), [1.5], atol=1e-15)
    np.testing.assert_allclose(align_epsilon(np.array([0.0]), np.array([2.0]), one, 10, 0, 0.5), [0.5], atol=1e-15)
    np.testing.assert_allclose(align_pred_x0(np.array([0.0]), np.array([4.0]), 10, 0, 0.3), [1.2], atol=1e-15)
    # eps* = (x - sqrt(a) ref) / sqrt(1 - a) with x=2, ref=1, a=0.64: (2 - 0.8) / 0.6 = 2
    got = align_epsilon_scaled(np.array([0.0]), np.array([2.0]), one, 0.64, 10, 0, 0.5)
    np.testing.assert_allclose(got, [1.0], atol=1e-14)


def test_full_strength_returns_reconstruction_quantity():
    x, ref, eps = np.array([0.3, -1.0]), np.array([2.0, 0.5]), np.array([0.1, 0.2])
    assert np.array_equal(align_input(x, ref, 10, 0, 1.0), ref)
    assert np.array_equal(align_epsilon(eps, x, ref, 10, 0, 1.0), x - ref)
    assert np.array_equal(align_pred_x0(eps, ref, 10, 0, 1.0), ref)
    true_eps = np.array([-0.7, 1.3])
    x_t = forward_diffuse(ref, true_eps, 0.3)
    np.testing.assert_allclose(align_epsilon_scaled(eps, x_t, ref, 0.3, 10, 0, 1.0), true_eps, atol=1e-14)


def test_epsilon_scaled_rejects_alpha_endpoints():
    x = np.zeros(1)
    for a in (0.0, 1.0):
        with pytest.raises(ValueError):
            align_epsilon_scaled(x, x, x, a, 10, 0, 0.5)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        align_pred_x0(np.zeros(2), np.zeros(3), 10, 0, 0.5)
    with pytest.raises(ValueError):
        align_epsilon(np.zeros(2), np.zeros(2), np.zeros(3), 10, 0, 0.5)


@given(grid_pairs(), grid_pairs(), unit, st.integers(0, T), st.integers(0, T))
def test_identity_when_gated_or_zero_strength(ab, cd, beta, t, K):
    a, b = ab
    c, _ = cd
    if c.shape != a.shape:
        return
    for bt in ([beta] if t <= K else [0.0]):
        assert np.array_equal(align_input(a, b, t, K, bt), a)
        assert np.array_equal(align_epsilon(a, b, c, t, K, bt), a)
        assert np.array_equal(align_pred_x0(a, b, t, K, bt), a)
        assert np.array_equal(align_epsilon_scaled(a, b, c, 0.5, t, K, bt), a)


@given(grid_pairs(), unit)
def test_affine_with_unit_coefficient_sum(ab, beta):
    a, b = ab
    out = align_pred_x0(a, b, 10, 0, beta)
    expected = beta * b + (1 - beta) * a
    assert np.allclose(out, expected, rtol=1e-12, atol=1e-12 * (1 + np.abs(a).max() + np.abs(b).max()))
    # Adding a constant to both operands shifts the output by that constant.
    shifted = align_pred_x0(a + 1.0, b + 1.0, 10, 0, beta)
    assert np.allclose(shifted, out + 1.0, rtol=1e-9, atol=1e-9 * (1 + np.abs(out).max()))


def test_config_validation_and_items_round_trip():
    cfg = AlignmentConfig(mode="epsilon-scaled", K=350, beta_law="linear", beta_value=0.8, symmetry_breaking=True)
    assert AlignmentConfig.from_items(cfg.to_items()) == cfg
    with pytest.raises(ValueError):
        AlignmentConfig(mode="attention")
    with pytest.raises(ValueError):
        AlignmentConfig(beta_value=1.5)
    with pytest.raises(ValueError):
        AlignmentConfig(K=-1)
    with pytest.raises(ValueError):
        AlignmentConfig(K=2000).validate_for(T)
    with pytest.raises(ValueError):
        AlignmentConfig.from_items({"strength": "1"})


@pytest.mark.parametrize("text,value", [("true", True), ("Yes", True), ("0", False), ("off", False)])
def test_parse_bool(text, value):
    assert parse_bool(text) is value


def test_parse_bool_rejects():
    with pytest.raises(ValueError):
        parse_bool("maybe")
