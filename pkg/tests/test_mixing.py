import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latalign.grid import write_pgm
from latalign.mixing import check_mask, load_mask, mix_latents

from conftest import grid_pairs, unit


def test_scalar_example():
    out = mix_latents(np.array([2.0]), np.array([0.0]), np.array([0.25]), 10, 0)
    np.testing.assert_allclose(out, [0.5], atol=1e-15)


@given(grid_pairs())
def test_degenerate_masks_bitwise(ab):
    a, b = ab
    assert mix_latents(a, b, np.ones(a.shape), 10, 0).tobytes() == a.tobytes()
    assert mix_latents(a, b, np.zeros(a.shape), 10, 0).tobytes() == b.tobytes()


@given(grid_pairs(), unit)
def test_equal_inputs_fixed(ab, m):
    a, _ = ab
    assert np.array_equal(mix_latents(a, a, np.full(a.shape, m), 10, 0), a)


@given(grid_pairs(), unit, unit)
def test_monotone_in_mask(ab, m1, m2):
    a, b = ab
    lo, hi = sorted((m1, m2))
    out_lo = mix_latents(a, b, np.full(a.shape, lo), 10, 0)
    out_hi = mix_latents(a, b, np.full(a.shape, hi), 10, 0)
    tol = 1e-12 * (1 + np.abs(a) + np.abs(b))
    assert np.all(np.abs(out_hi - a) <= np.abs(out_lo - a) + tol)


def test_gate_returns_free_branch():
    a, b = np.ones(3), np.zeros(3)
    assert mix_latents(a, b, np.ones(3), 200, 200) is b


def test_mask_broadcasts_over_channels():
    a, b = np.ones((2, 2, 2)), np.zeros((2, 2, 2))
    m = np.array([[1.0, 0.0], [0.5, 0.0]])
    out = mix_latents(a, b, m, 10, 0)
    assert np.array_equal(out[0], m) and np.array_equal(out[1], m)


def test_mask_errors():
    with pytest.raises(ValueError):
        check_mask(np.array([1.2]), (1,))
    with pytest.raises(ValueError):
        check_mask(np.array([-0.1]), (1,))
    with pytest.raises(ValueError):
        check_mask(np.ones((3, 3)), (2, 2))
    with pytest.raises(ValueError):
        mix_latents(np.ones(2), np.ones(3), np.ones(2), 10, 0)


def _pgm(path, w, h, values, maxval=65535):
    dtype = ">u2" if maxval > 255 else "u1"
    path.write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + np.asarray(values, dtype=dtype).tobytes())


def test_load_mask_levels(tmp_path):
    _pgm(tmp_path / "white.pgm", 2, 2, [255] * 4, 255)
    _pgm(tmp_path / "black.pgm", 2, 2, [0] * 4, 255)
    _pgm(tmp_path / "gray.pgm", 2, 2, [32768] * 4)
    assert np.all(load_mask(tmp_path / "white.pgm", (2, 2)) == 1.0)
    assert np.all(load_mask(tmp_path / "black.pgm", (3, 2, 2)) == 0.0)
    np.testing.assert_allclose(load_mask(tmp_path / "gray.pgm", (2, 2)), 32768 / 65535)
    assert abs(32768 / 65535 - 0.50001) < 1e-5


def test_load_mask_dimension_checks(tmp_path):
    _pgm(tmp_path / "m.pgm", 3, 1, [0, 128, 255], 255)
    assert load_mask(tmp_path / "m.pgm", (3,)).shape == (3,)
    with pytest.raises(ValueError):
        load_mask(tmp_path / "m.pgm", (2, 2))
    with pytest.raises(ValueError):
        load_mask(tmp_path / "m.pgm", (4,))
    (tmp_path / "bad.pgm").write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(ValueError):
        load_mask(tmp_path / "bad.pgm", (2, 2))


def test_write_pgm_mask_round_trip(tmp_path):
    m = np.array([[0.0, 1.0], [0.25, 0.75]])
    write_pgm(tmp_path / "m.pgm", m, 0.0, 1.0)
    np.testing.assert_allclose(load_mask(tmp_path / "m.pgm", (2, 2)), m, atol=1 / 65535)
