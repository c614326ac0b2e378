"""Latent grids, seeded Gaussian streams and grid file formats.

A latent grid is a float64 numpy array. Engine operations validate shape and
finiteness on the way in and out; arrays are never mutated in place.

Random numbers come from a single documented generator, ``pcg64-boxmuller/1``:

* raw 64-bit words from numpy's ``PCG64`` seeded via ``SeedSequence(seed)``;
* each word ``w`` becomes a uniform ``u = (w >> 11) * 2**-53`` in [0, 1);
* words are consumed in pairs ``(w1, w2)`` and turned into two normals with
  Box-Muller: ``r = sqrt(-2 ln(1 - u1))``, ``z0 = r cos(2 pi u2)``,
  ``z1 = r sin(2 pi u2)``;
* a request for ``n`` values consumes ``2 * ceil(n / 2)`` words, and a
  trailing unused normal is discarded.

This avoids numpy's ziggurat sampler so the stream can be replicated from the
PCG64 word sequence alone.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

RNG_NAME = "pcg64-boxmuller/1"


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ValueError("grid shape must have at least one extent")
    if any(s <= 0 for s in shape):
        raise ValueError(f"grid extents must be positive, got {shape}")
    return shape


def as_grid(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Validate ``data`` as a latent grid and return a float64 array.

    The result is a fresh read-only array, so grids can be shared freely.
    """
    arr = np.array(data, dtype=np.float64)
    if shape is not None:
        shape = _check_shape(shape)
        if arr.size != math.prod(shape):
            raise ValueError(f"{arr.size} values do not fill shape {shape}")
        arr = arr.reshape(shape)
    else:
        _check_shape(arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid contains non-finite values")
    arr.setflags(write=False)
    return arr


def checked(arr: np.ndarray) -> np.ndarray:
    """Finiteness guard applied to the output of every engine operation."""
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError("operation produced non-finite values")
    return arr


def same_shape(*grids: np.ndarray) -> None:
    first = grids[0].shape
    for g in grids[1:]:
        if g.shape != first:
            raise ValueError(f"shape mismatch: {first} vs {g.shape}")


class RngStream:
    """Deterministic stream of standard normals (see module docstring)."""

    name = RNG_NAME

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.PCG64(np.random.SeedSequence(self.seed))
        self.position = 0  # raw 64-bit words consumed so far

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1), one raw word each."""
        words = self._bits.random_raw(n)
        self.position += n
        return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def __repr__(self):
        return f"RngStream(seed={self.seed}, position={self.position})"


def gaussian_grid(rng: RngStream, shape: Sequence[int]) -> np.ndarray:
    shape = _check_shape(shape)
    return as_grid(rng.normals(math.prod(shape)).reshape(shape))


def lerp(a: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    """Elementwise ``w * a + (1 - w) * b``.

    Evaluated as ``b + w (a - b)`` so the result is exact whenever ``a == b``;
    the endpoints ``w = 0`` and ``w = 1`` return copies of ``b`` and ``a``.
    """
    same_shape(a, b)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"interpolation weight must lie in [0, 1], got {w}")
    if w in (0.0, 1.0):
        return checked(np.array(a if w == 1.0 else b, dtype=np.float64))
    return checked(b + w * (a - b))


# --- encode/decode seam -----------------------------------------------------

def encode(image: np.ndarray) -> np.ndarray:
    # Identity at desk scale: the toy data already lives in latent space.
    return as_grid(image)


def decode(latent: np.ndarray) -> np.ndarray:
    return as_grid(latent)


# --- file formats -----------------------------------------------------------

def write_pgm(path, grid: np.ndarray, vmin: float | None = None,
              vmax: float | None = None, comments: Sequence[str] = ()) -> None:
    """Write a 2-D grid as a 16-bit binary PGM (P5).

    Values are mapped affinely from ``[vmin, vmax]`` (default: the grid's own
    range) onto 0..65535; the range is recorded as ``# range <min> <max>``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("PGM export needs a 2-D grid")
    vmin = float(grid.min()) if vmin is None else float(vmin)
    vmax = float(grid.max()) if vmax is None else float(vmax)
    span = vmax - vmin
    if span > 0:
        scaled = np.clip((grid - vmin) / span, 0.0, 1.0)
    else:
        scaled = np.zeros_like(grid)
    pix = np.round(scaled * 65535).astype(">u2")
    h, w = grid.shape
    header = ["P5", f"# range {vmin!r} {vmax!r}"]
    header += [f"# {c}" for c in comments]
    header += [f"{w} {h}", "65535"]
    Path(path).write_bytes(("\n".join(header) + "\n").encode("ascii") + pix.tobytes())


def read_pgm(path) -> tuple[np.ndarray, int, tuple[float, float] | None]:
    """Read a binary PGM (8- or 16-bit).

    Returns ``(pixels, maxval, value_range)`` where ``value_range`` is taken from
    a ``# range`` header comment when present.
    """
    raw = Path(path).read_bytes()
    pos = 0
    tokens: list[str] = []
    value_range = None

    def skip_space_and_comments():
        nonlocal pos, value_range
        while pos < len(raw):
            c = raw[pos:pos + 1]
            if c.isspace():
                pos += 1
            elif c == b"#":
                end = raw.find(b"\n", pos)
                end = len(raw) if end < 0 else end
                parts = raw[pos + 1:end].decode("ascii", "replace").split()
                if len(parts) == 3 and parts[0] == "range":
                    value_range = (float(parts[1]), float(parts[2]))
                pos = end + 1
            else:
                break

    while len(tokens) < 4:
        skip_space_and_comments()
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos].decode("ascii", "replace"))
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM header") from exc
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ValueError(f"{path}: invalid PGM dimensions or maxval")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    n = w * h * dtype.itemsize
    if len(raw) - pos < n:
        raise ValueError(f"{path}: PGM pixel data truncated")
    pix = np.frombuffer(raw[pos:pos + n], dtype=dtype).reshape(h, w)
    return pix.astype(np.float64), maxval, value_range


def load_pgm_grid(path) -> np.ndarray:
    """Load a 2-D grid from PGM, inverting the recorded ``# range`` mapping."""
    pix, maxval, value_range = read_pgm(path)
    lo, hi = value_range if value_range is not None else (0.0, 1.0)
    return as_grid(lo + pix / maxval * (hi - lo))


def write_grid_csv(path, grid: np.ndarray, comments: Sequence[str] = ()) -> None:
    """CSV grid format: optional ``#`` comment lines, a ``shape,<d1>,<d2>,...``
    line, then one value per line in row-major order (shortest round-trip repr)."""
    grid = np.asarray(grid, dtype=np.float64)
    lines = [f"# {c}" for c in comments]
    lines.append("shape," + ",".join(str(s) for s in grid.shape))
    lines.extend(repr(float(v)) for v in grid.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("shape,"):
        raise ValueError(f"{path}: missing 'shape,' header line")
    try:
        shape = [int(s) for s in lines[0].split(",")[1:]]
        values = [float(v) for v in lines[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed grid CSV") from exc
    return as_grid(values, shape)


def load_grid(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return load_pgm_grid(path)
    return read_grid_csv(path)
