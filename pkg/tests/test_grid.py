import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latalign.grid import (RNG_NAME, RngStream, as_grid, gaussian_grid, lerp, load_grid, load_pgm_grid,
                           read_grid_csv, read_pgm, write_grid_csv, write_pgm)

from conftest import grid_pairs, grids, unit


def box_muller_oracle(seed, n):
    """Independent replica of the documented transform, one value at a time."""
    bits = np.random.PCG64(np.random.SeedSequence(seed))
    out = []
    while len(out) < n:
        w1, w2 = (int(w) for w in bits.random_raw(2))
        u1, u2 = (w1 >> 11) / 2**53, (w2 >> 11) / 2**53
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        out += [r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2)]
    return np.array(out[:n])


def test_rng_matches_documented_transform():
    got = RngStream(42).normals(7)
    np.testing.assert_allclose(got, box_muller_oracle(42, 7), rtol=0, atol=1e-14)
    assert RNG_NAME == "pcg64-boxmuller/1"


def test_rng_odd_request_discards_trailing_normal():
    rng = RngStream(3)
    rng.normals(3)
    assert rng.position == 4
    np.testing.assert_array_equal(rng.normals(2), box_muller_oracle(3, 6)[4:])


def test_gaussian_grid_reproducible_per_seed():
    a = gaussian_grid(RngStream(0), [4])
    b = gaussian_grid(RngStream(0), [4])
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, gaussian_grid(RngStream(1), [4]))


def test_gaussian_grid_moments():
    x = gaussian_grid(RngStream(5), [10000])
    assert -0.05 < x.mean() < 0.05
    assert 0.9 < x.var() < 1.1


@pytest.mark.parametrize("shape", [[], [0], [2, 0]])
def test_gaussian_grid_rejects_empty_shape(shape):
    with pytest.raises(ValueError):
        gaussian_grid(RngStream(0), shape)


def test_as_grid_rejects_non_finite_and_is_read_only():
    with pytest.raises(ValueError):
        as_grid([1.0, math.nan])
    g = as_grid([1.0, 2.0])
    assert g.dtype == np.float64 and not g.flags.writeable
    with pytest.raises(ValueError):
        as_grid([1.0, 2.0, 3.0], (2, 2))


def test_lerp_examples():
    a, b = np.array([2.0]), np.array([0.0])
    np.testing.assert_allclose(lerp(a, b, 0.3), [0.6], rtol=0, atol=1e-15)
    assert np.array_equal(lerp(a, b, 0.0), b)
    assert np.array_equal(lerp(a, b, 1.0), a)


def test_lerp_errors():
    with pytest.raises(ValueError):
        lerp(np.zeros(2), np.zeros(3), 0.5)
    for w in (-0.1, 1.1):
        with pytest.raises(ValueError):
            lerp(np.zeros(2), np.zeros(2), w)


@given(grids(), unit)
def test_lerp_of_equal_grids_is_identity(a, w):
    assert np.array_equal(lerp(a, a, w), a)


@given(grid_pairs(), unit)
def test_lerp_shape_finite_and_between(ab, w):
    a, b = ab
    out = lerp(a, b, w)
    assert out.shape == a.shape and np.all(np.isfinite(out))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    slack = 1e-12 * (1 + np.abs(a) + np.abs(b))
    assert np.all(out >= lo - slack) and np.all(out <= hi + slack)


@given(grid_pairs())
def test_lerp_endpoints_bitwise(ab):
    a, b = ab
    assert lerp(a, b, 0.0).tobytes() == b.tobytes()
    assert lerp(a, b, 1.0).tobytes() == a.tobytes()


def test_grid_csv_round_trip_exact(tmp_path):
    g = gaussian_grid(RngStream(9), [2, 3, 2])
    write_grid_csv(tmp_path / "g.csv", g, ["hello"])
    text = (tmp_path / "g.csv").read_text().splitlines()
    assert text[0] == "# hello" and text[1] == "shape,2,3,2"
    back = read_grid_csv(tmp_path / "g.csv")
    assert back.shape == g.shape and back.tobytes() == g.tobytes()
    assert load_grid(tmp_path / "g.csv").tobytes() == g.tobytes()


def test_grid_csv_malformed(tmp_path):
    (tmp_path / "bad.csv").write_text("1\n2\n")
    with pytest.raises(ValueError):
        read_grid_csv(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("shape,3\n1\n2\n")
    with pytest.raises(ValueError):
        read_grid_csv(tmp_path / "bad2.csv")


def test_pgm_round_trip_within_quantisation(tmp_path):
    g = gaussian_grid(RngStream(2), [5, 7])
    write_pgm(tmp_path / "g.pgm", g, comments=["config_hash: abc"])
    raw = (tmp_path / "g.pgm").read_bytes()
    assert raw.startswith(b"P5\n# range ") and b"# config_hash: abc" in raw
    pix, maxval, rng = read_pgm(tmp_path / "g.pgm")
    assert maxval == 65535 and pix.shape == (5, 7)
    assert rng == (float(g.min()), float(g.max()))
    back = load_pgm_grid(tmp_path / "g.pgm")
    step = (g.max() - g.min()) / 65535
    assert np.max(np.abs(back - g)) <= step / 2 + 1e-12


def test_pgm_8bit_and_errors(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P5\n# c\n2 1\n255\n\x00\xff")
    pix, maxval, rng = read_pgm(tmp_path / "a.pgm")
    assert maxval == 255 and rng is None and pix.tolist() == [[0.0, 255.0]]
    (tmp_path / "b.pgm").write_bytes(b"P2\n2 1\n255\n0 255\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "b.pgm")
    (tmp_path / "c.pgm").write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "c.pgm")
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "d.pgm", np.zeros(3))


@given(st.integers(0, 2**32))
def test_rng_position_counts_words(seed):
    rng = RngStream(seed)
    rng.normals(5)
    rng.uniforms(2)
    assert rng.position == 8
