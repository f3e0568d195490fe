"""Deterministic synthetic test images.

``square_pair``
    64x64 gray, background 0.5.  A bright bar (0.8) fills rows 32-47,
    columns 6-9, and a 4x4 square (0.7) sits at rows 16-19, columns 26-29.
    The second image is the same scene shifted two pixels to the left.  At
    160:1 subband thresholding the square is lost in the original
    alignment and kept exactly in the shifted one.

``curved_strokes``
    Gray texture of thin anti-aliased curved strokes (perturbed concentric
    rings around an off-centre point) on a mid-gray background, 96x96 by
    default.  Centre and wobble come from a seeded RNG.  Rings are 8 px
    apart and about 1.2 px wide; much denser rings sit at the Haar Nyquist
    limit and the alignment problem degenerates.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .image import save_image

SQUARE_SIZE = 4
SQUARE_POS = (16, 26)        # (row, column) of the top-left corner
SQUARE_VALUE = 0.7
BAR = (32, 48, 6, 10, 0.8)   # rows [r0, r1), columns [c0, c1), value
BACKGROUND = 0.5
SQUARE_SHAPE = (64, 64)
SQUARE_SHIFT = 2
SQUARE_RATIO = 160.0

STROKES_SIZE = 96
STROKES_SEED = 7
STROKES_SPACING = 8.0
STROKES_WIDTH = 1.2


def _render_square_scene(shift: int) -> np.ndarray:
    h, w = SQUARE_SHAPE
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :] + shift
    img = np.full(SQUARE_SHAPE, BACKGROUND)
    r0, r1, c0, c1, val = BAR
    img[(rows >= r0) & (rows < r1) & (cols >= c0) & (cols < c1)] = val
    sr, sc = SQUARE_POS
    inside = (rows >= sr) & (rows < sr + SQUARE_SIZE) & (cols >= sc) & (cols < sc + SQUARE_SIZE)
    img[inside] = SQUARE_VALUE
    return img


def square_pair(shift: int = SQUARE_SHIFT):
    """``(image, image shifted left by shift pixels)``."""
    return _render_square_scene(0), _render_square_scene(shift)


def curved_strokes(size: int = STROKES_SIZE, seed: int = STROKES_SEED,
                   spacing: float = STROKES_SPACING, width: float = STROKES_WIDTH) -> np.ndarray:
    """Seeded ring texture in [0.35, 0.85]."""
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = size * (0.45 + 0.1 * rng.random()), size * (0.45 + 0.1 * rng.random())
    theta = np.arctan2(rows - cy, cols - cx)
    radius = np.hypot(rows - cy, cols - cx)
    wobble = np.zeros_like(radius)
    for k in (3, 5, 7):
        amp, phase = rng.uniform(0.5, 1.5), rng.uniform(0, 2 * np.pi)
        wobble += amp * np.sin(k * theta + phase)
    # distance to the nearest ring, in pixels
    r = radius + wobble
    dist = np.abs(r - spacing * np.round(r / spacing))
    strokes = np.clip(1.0 - (dist - width / 2), 0.0, 1.0)
    return 0.35 + 0.5 * strokes


@dataclass
class FixtureFiles:
    square: str
    square_shifted: str
    strokes: str


def write_fixtures(out_dir) -> FixtureFiles:
    os.makedirs(out_dir, exist_ok=True)
    a, b = square_pair()
    files = FixtureFiles(
        os.path.join(out_dir, "square.png"),
        os.path.join(out_dir, "square_shifted.png"),
        os.path.join(out_dir, "strokes.png"),
    )
    save_image(a, files.square)
    save_image(b, files.square_shifted)
    save_image(curved_strokes(), files.strokes)
    return files
