"""Image arrays, raster I/O and per-pixel helpers.

Images are plain float64 numpy arrays with samples in [0, 1]: shape
``(H, W)`` for gray and ``(H, W, 3)`` for RGB (channels in R, G, B order).
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass

import cv2
import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_READABLE = {".png", ".pgm", ".ppm", ".pnm"}


class ImageIOError(OSError):
    """Raised when a raster cannot be read or written."""


def as_image(arr) -> np.ndarray:
    """Validate and convert ``arr`` to a float64 image array."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("zero-size raster")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def load_image(path) -> np.ndarray:
    """Read a PNG or binary PGM/PPM file into a float image in [0, 1].

    8-bit samples are divided by 255 and 16-bit samples by 65535.
    """
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext not in _READABLE:
        raise ImageIOError(f"unsupported format: {path}")
    if not os.path.isfile(path):
        raise ImageIOError(f"unreadable file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"unreadable file: {path}")
    if raw.size == 0:
        raise ImageIOError(f"zero-size raster: {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageIOError(f"unsupported sample type {raw.dtype}: {path}")
    return np.clip(raw.astype(np.float64) / scale, 0.0, 1.0)


def to_bytes(img: np.ndarray) -> np.ndarray:
    """Quantize to uint8 with clamping and round-half-up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write an 8-bit PNG (or PGM/PPM, chosen by extension)."""
    img = as_image(img)
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext not in _READABLE:
        raise ImageIOError(f"unsupported format: {path}")
    data = to_bytes(img)
    if data.ndim == 3:
        data = np.ascontiguousarray(data[:, :, ::-1])
    try:
        ok = cv2.imwrite(path, data)
    except cv2.error as exc:
        raise ImageIOError(f"unwritable path: {path}") from exc
    if not ok:
        raise ImageIOError(f"unwritable path: {path}")


def luminance(img) -> np.ndarray:
    """Rec. 601 luma of an RGB image; a copy for gray input."""
    img = as_image(img)
    if img.ndim == 2:
        return img.copy()
    return img @ LUMA_WEIGHTS


def ssd(a, b) -> float:
    """Sum of squared differences over every sample."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    d = (a - b).ravel()
    # numpy's pairwise summation: deterministic, unlike threaded BLAS dot
    return float(np.sum(d * d))


def psnr(ssd_value: float, n_samples: int) -> float:
    """PSNR in dB for peak 1.0; ``inf`` for identical images."""
    if ssd_value <= 0:
        return math.inf
    return 10.0 * math.log10(n_samples / ssd_value)


@dataclass
class MetricsReport:
    ssd: float
    psnr: float
    dassd: float
    flow_penalty: float
    achieved_rate: float
    iterations: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(out["psnr"]):
            out["psnr"] = None
        return out
