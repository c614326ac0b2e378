"""Mask-weighted mixing of an aligned latent with a freely edited one."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .grid import checked, read_pgm


def check_mask(mask: np.ndarray, latent_shape: Sequence[int]) -> np.ndarray:
    """A mask covers the trailing (spatial) axes of the latent and broadcasts
    over any leading channel axes."""
    mask = np.asarray(mask, dtype=np.float64)
    latent_shape = tuple(latent_shape)
    if mask.ndim == 0 or mask.ndim > len(latent_shape) or mask.shape != latent_shape[-mask.ndim:]:
        raise ValueError(f"mask shape {mask.shape} incompatible with latent shape {latent_shape}")
    if not np.all(np.isfinite(mask)) or mask.min() < 0.0 or mask.max() > 1.0:
        raise ValueError("mask values must lie in [0, 1]")
    return mask


def mix_latents(x_aligned: np.ndarray, x_free: np.ndarray, mask: np.ndarray,
                t: int, K: int) -> np.ndarray:
    """``x_aligned * M + x_free * (1 - M)`` above the cutoff, ``x_free`` below."""
    if x_aligned.shape != x_free.shape:
        raise ValueError(f"shape mismatch: {x_aligned.shape} vs {x_free.shape}")
    mask = check_mask(mask, x_free.shape)
    if t <= K:
        return x_free
    # Same evaluation order as lerp; M in {0, 1} selects a branch bitwise.
    mixed = x_free + mask * (x_aligned - x_free)
    return checked(np.where(mask == 1.0, x_aligned, np.where(mask == 0.0, x_free, mixed)))


def load_mask(path, shape: Sequence[int]) -> np.ndarray:
    """Read an 8- or 16-bit PGM mask and rescale it linearly to [0, 1].

    ``shape`` is the latent shape (or just its spatial extents); the PGM must
    match the trailing two axes, or the last axis of a 1-D latent when the
    image is a single row.
    """
    pix, maxval, _ = read_pgm(path)
    mask = pix / maxval
    shape = tuple(shape)
    if len(shape) == 1:
        if mask.shape != (1, shape[0]):
            raise ValueError(f"mask {mask.shape} does not fit 1-D latent of length {shape[0]}")
        return check_mask(mask[0], shape)
    if mask.shape != shape[-2:]:
        raise ValueError(f"mask {mask.shape} does not match spatial extents {shape[-2:]}")
    return check_mask(mask, shape)
