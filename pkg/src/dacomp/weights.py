"""Spatially varying smoothness weights ``w = 1 + alpha * (G_sigma * E)``.

``E`` is a normalized Sobel edge map of the input.  Large weights near
salient boundaries keep object outlines from being bent by the flow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import as_image, luminance

EDGE_PRESMOOTH_SIGMA = 1.0
EDGE_PERCENTILE = 99.0
DEFAULT_SIGMA = 10.0

# regularization strength by codec family
ALPHA_DEFAULTS = {
    "jpeg": 20.0,
    "jpeg2000": 3.0,
    "global": 3.0,
    "subband": 3.0,
    "webp": 6.0,
    "bpg": 6.0,
    "deep": 6.0,
}


@dataclass
class WeightMap:
    weights: np.ndarray
    alpha: float = 0.0
    sigma: float = DEFAULT_SIGMA

    @classmethod
    def constant(cls, shape) -> "WeightMap":
        return cls(np.ones(tuple(shape[:2])), 0.0, DEFAULT_SIGMA)

    @property
    def shape(self):
        return self.weights.shape


def weights_array(w, shape) -> np.ndarray:
    """Resolve ``None`` / ``WeightMap`` / array to a 2-D weight array."""
    if w is None:
        return np.ones(shape)
    arr = w.weights if isinstance(w, WeightMap) else np.asarray(w, dtype=np.float64)
    if arr.shape != tuple(shape):
        raise ValueError(f"dimension mismatch: weights {arr.shape} vs image {tuple(shape)}")
    return arr


def edge_map(y) -> np.ndarray:
    """Sobel gradient magnitude of smoothed luminance, scaled into [0, 1].

    The magnitude is divided by its 99th percentile (or its maximum when the
    percentile is zero, as for a single thin edge) and clamped.
    """
    lum = ndimage.gaussian_filter(luminance(y), EDGE_PRESMOOTH_SIGMA, mode="reflect")
    mag = np.hypot(ndimage.sobel(lum, axis=1, mode="reflect"),
                   ndimage.sobel(lum, axis=0, mode="reflect"))
    scale = np.percentile(mag, EDGE_PERCENTILE)
    if scale <= 1e-12:
        scale = mag.max()
    if scale <= 1e-12:
        return np.zeros_like(mag)
    return np.clip(mag / scale, 0.0, 1.0)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    # unit-sum kernel truncated at 3 sigma, half-sample reflection at borders
    return ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=3.0)


def build_weight_map(y, alpha: float, sigma: float = DEFAULT_SIGMA) -> WeightMap:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    y = as_image(y)
    if alpha == 0:
        return WeightMap(np.ones(y.shape[:2]), 0.0, sigma)
    return WeightMap(1.0 + alpha * gaussian_blur(edge_map(y), sigma), alpha, sigma)
