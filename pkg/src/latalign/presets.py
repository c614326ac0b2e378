"""Ready-made mixture specs for experiments and tests.

``layout_spec`` is the main editing toy. Each class owns one component per
shared "layout" (a random grid with large spread), shifted by a small
class-specific patch. Layouts separate early in the forward process and the
class patch separates late, so aligning the early steps keeps the layout of the
reference while the late steps are free to change the class.
"""
from __future__ import annotations

import numpy as np

from .denoiser import Component, MixtureSpec, two_class_spec


def class_patch(shape=(4, 4), corner=(0, 0), size=2) -> np.ndarray:
    """Unit-norm indicator of a ``size`` x ``size`` block of a 2-D grid."""
    u = np.zeros(shape)
    r, c = corner
    u[r:r + size, c:c + size] = 1.0
    return u / np.linalg.norm(u)


def layout_spec(shape=(4, 4), n_layouts=8, layout_scale=1.0, class_offset=1.5,
                variance=0.01, seed=0) -> MixtureSpec:
    """Two classes (0 and 1) over ``n_layouts`` shared layouts.

    Class ``k`` component ``j`` has mean ``layout_j + (k - 1/2) * class_offset * patch``
    where ``patch`` is a unit-norm 2x2 block in the top-left corner.
    """
    gen = np.random.default_rng(seed)
    layouts = layout_scale * gen.standard_normal((n_layouts,) + tuple(shape))
    patch = class_patch(shape)
    comps = []
    for k in (0, 1):
        for lay in layouts:
            comps.append(Component(1.0 / n_layouts, lay + (k - 0.5) * class_offset * patch, variance, k))
    return MixtureSpec(tuple(comps))


def separated_1d_spec(gap=6.0, variance=0.25) -> MixtureSpec:
    """Two well separated 1-D classes at ``-gap/2`` and ``+gap/2``."""
    return two_class_spec([-gap / 2], [gap / 2], variance)


def three_component_1d_spec() -> MixtureSpec:
    """Three unequal 1-D components over two classes."""
    return MixtureSpec((
        Component(0.3, np.array([-2.0]), 0.5, 0),
        Component(0.7, np.array([0.5]), 0.2, 0),
        Component(1.0, np.array([3.0]), 1.0, 1),
    ), {0: 0.6, 1: 0.4})
