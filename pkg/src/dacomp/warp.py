"""Backward warping of images by dense flow fields with Catmull-Rom bicubic
interpolation.

The warped image is ``out(xi, eta) = y(xi + u(xi, eta), eta + v(xi, eta))``
where ``xi`` is the column and ``eta`` the row index.  Positive ``u`` moves
the sampling location to the right.  Source coordinates falling outside the
raster are clamped to the border.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .image import as_image

FLO_MAGIC = 202021.25


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError("u and v must be 2-D arrays of equal shape")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("flow contains non-finite values")

    @classmethod
    def identity(cls, shape) -> "FlowField":
        shape = tuple(shape[:2])
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def shape(self) -> tuple:
        return self.u.shape

    def copy(self) -> "FlowField":
        return FlowField(self.u.copy(), self.v.copy())

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


def write_flo(flow: FlowField, path) -> None:
    """Dump a flow in the Middlebury ``.flo`` layout (little-endian float32)."""
    h, w = flow.shape
    data = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
        fh.write(data.tobytes())


def read_flo(path) -> FlowField:
    with open(path, "rb") as fh:
        magic, w, h = struct.unpack("<fii", fh.read(12))
        if magic != np.float32(FLO_MAGIC):
            raise ValueError(f"{path}: bad .flo magic")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != 2 * w * h:
        raise ValueError(f"{path}: truncated .flo payload")
    data = data.reshape(h, w, 2).astype(np.float64)
    return FlowField(data[..., 0], data[..., 1])


def _cubic_weights(t: np.ndarray):
    """Catmull-Rom (a = -0.5) weights for taps at offsets -1, 0, 1, 2."""
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2 * t2 - t),
        0.5 * (3 * t3 - 5 * t2 + 2),
        0.5 * (-3 * t3 + 4 * t2 + t),
        0.5 * (t3 - t2),
    )


def _cubic_weight_derivs(t: np.ndarray):
    t2 = t * t
    return (
        0.5 * (-3 * t2 + 4 * t - 1),
        0.5 * (9 * t2 - 10 * t),
        0.5 * (-9 * t2 + 8 * t + 1),
        0.5 * (3 * t2 - 2 * t),
    )


def sample_bicubic(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, gradient: bool = False):
    """Sample ``img`` at real coordinates ``(xs, ys)`` (column, row).

    Returns the interpolated values, and with ``gradient=True`` also their
    derivatives with respect to ``xs`` and ``ys``.  Coordinates are clamped
    to the raster, so the derivative along a clamped axis is zero.
    """
    h, w = img.shape[:2]
    xc = np.clip(xs, 0.0, w - 1)
    yc = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    tx = xc - x0
    ty = yc - y0
    wx = _cubic_weights(tx)
    wy = _cubic_weights(ty)
    if gradient:
        dwx = _cubic_weight_derivs(tx)
        dwy = _cubic_weight_derivs(ty)

    extra = img.shape[2:]
    out = np.zeros(xs.shape + extra)
    gx = np.zeros_like(out) if gradient else None
    gy = np.zeros_like(out) if gradient else None
    expand = (lambda a: a[..., None]) if extra else (lambda a: a)
    cols = [np.clip(x0 + k, 0, w - 1) for k in (-1, 0, 1, 2)]
    for j, dy in enumerate((-1, 0, 1, 2)):
        rows = np.clip(y0 + dy, 0, h - 1)
        # interpolate along x first for this tap row
        line = np.zeros_like(out)
        dline = np.zeros_like(out) if gradient else None
        for i in range(4):
            px = img[rows, cols[i]]
            line += expand(wx[i]) * px
            if gradient:
                dline += expand(dwx[i]) * px
        out += expand(wy[j]) * line
        if gradient:
            gx += expand(wy[j]) * dline
            gy += expand(dwy[j]) * line
    if not gradient:
        return out
    inside_x = expand(((xs >= 0) & (xs <= w - 1)).astype(np.float64))
    inside_y = expand(((ys >= 0) & (ys <= h - 1)).astype(np.float64))
    return out, gx * inside_x, gy * inside_y


def source_grid(flow: FlowField):
    h, w = flow.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    return cols + flow.u, rows + flow.v


def warp_unclamped(y: np.ndarray, flow: FlowField, gradient: bool = False):
    if y.shape[:2] != flow.shape:
        raise ValueError(f"dimension mismatch: image {y.shape[:2]} vs flow {flow.shape}")
    xs, ys = source_grid(flow)
    return sample_bicubic(y, xs, ys, gradient=gradient)


def warp(y, flow: FlowField) -> np.ndarray:
    """Warp ``y`` by ``flow`` and clamp the result to [0, 1]."""
    y = as_image(y)
    return np.clip(warp_unclamped(y, flow), 0.0, 1.0)
