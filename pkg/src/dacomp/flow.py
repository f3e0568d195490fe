"""Weighted Horn-Schunck flow estimation for warping ``y`` onto ``x``.

Minimizes::

    E(u, v) = sum (x - warp(y, (u, v)))**2
              + lam' * sum w * (|grad u|**2 + |grad v|**2)

with forward differences and Neumann borders.  ``lam`` is given for 8-bit
intensities (the customary scale for this weight), so with samples in
[0, 1] the penalty enters as ``lam' = lam / 255**2``.

The solver is coarse-to-fine.  Each outer iteration linearizes the warp
around the current flow, solves the resulting weighted least-squares
problem with red-black block SOR, and accepts the step only if the true
energy does not increase, halving it otherwise.  For ``lam`` below
``continuation_lam`` the flow is first solved at ``continuation_lam`` and
then refined at full resolution with the requested weight.
"""
from __future__ import annotations

import logging
import dataclasses
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .image import as_image, check_same_shape, ssd
from .warp import FlowField, warp, warp_unclamped
from .weights import weights_array

log = logging.getLogger(__name__)

INTENSITY_SCALE = 255.0
DEFAULT_LAMBDA = 65.0


def effective_lambda(lam: float) -> float:
    return lam / INTENSITY_SCALE ** 2


@dataclass
class FlowParams:
    lam: float = DEFAULT_LAMBDA
    pyramid_scale: float = 0.5
    min_size: int = 16
    outer_iterations: int = 5
    inner_iterations: int = 3
    solver_iterations: int = 30
    charbonnier_eps: float = 1e-3
    robust_data: bool = False
    sor_omega: float = 1.6
    presmooth_sigma: float = 0.8
    max_halvings: int = 6
    # below this lam the flow is first solved at this lam, then refined
    continuation_lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0 < self.pyramid_scale < 1:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        if not 0 < self.sor_omega < 2:
            raise ValueError("sor_omega must lie in (0, 2)")


@dataclass
class FlowEnergy:
    data_term: float
    smoothness_term: float
    lam: float

    @property
    def total(self) -> float:
        return self.data_term + effective_lambda(self.lam) * self.smoothness_term


def smoothness(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """Weighted squared forward-difference norm of both flow components."""
    total = 0.0
    for f in (u, v):
        dx = np.diff(f, axis=1)
        dy = np.diff(f, axis=0)
        total += float(np.sum(w[:, :-1] * dx * dx)) + float(np.sum(w[:-1, :] * dy * dy))
    return total


def _smoothness_grad(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    g = np.zeros_like(f)
    dx = w[:, :-1] * np.diff(f, axis=1)
    dy = w[:-1, :] * np.diff(f, axis=0)
    g[:, :-1] -= 2 * dx
    g[:, 1:] += 2 * dx
    g[:-1, :] -= 2 * dy
    g[1:, :] += 2 * dy
    return g


def _prepare(y, x, flow, w):
    y = as_image(y)
    x = as_image(x)
    check_same_shape(y, x)
    if flow is not None and flow.shape != y.shape[:2]:
        raise ValueError(f"dimension mismatch: flow {flow.shape} vs image {y.shape[:2]}")
    return y, x, weights_array(w, y.shape[:2])


def flow_energy(y, x, flow: FlowField, w=None, lam: float = DEFAULT_LAMBDA) -> FlowEnergy:
    """Energy of warping ``y`` onto ``x`` with ``flow``."""
    y, x, w = _prepare(y, x, flow, w)
    return FlowEnergy(ssd(x, warp(y, flow)), smoothness(flow.u, flow.v, w), lam)


def energy_gradient(y, x, flow: FlowField, w=None, lam: float = DEFAULT_LAMBDA):
    """Analytic gradient of the total energy with respect to ``(u, v)``."""
    y, x, w = _prepare(y, x, flow, w)
    wy, ix, iy = warp_unclamped(y, flow, gradient=True)
    active = (wy >= 0.0) & (wy <= 1.0)
    r = 2.0 * (np.clip(wy, 0.0, 1.0) - x) * active
    gu = r * ix
    gv = r * iy
    if gu.ndim == 3:
        gu = gu.sum(axis=2)
        gv = gv.sum(axis=2)
    mu = effective_lambda(lam)
    return gu + mu * _smoothness_grad(flow.u, w), gv + mu * _smoothness_grad(flow.v, w)


def flow_gradient_check(y, x, flow: FlowField, w=None, lam: float = DEFAULT_LAMBDA,
                        step: float = 1e-5) -> float:
    """Max discrepancy between analytic and central-difference gradients.

    The discrepancy is measured relative to the largest finite-difference
    gradient component, so near-zero entries do not dominate.
    """
    y, x, w = _prepare(y, x, flow, w)
    gu, gv = energy_gradient(y, x, flow, w, lam)
    fd = [np.zeros_like(gu), np.zeros_like(gv)]
    for comp in range(2):
        for idx in np.ndindex(flow.shape):
            probe = flow.copy()
            field = probe.u if comp == 0 else probe.v
            field[idx] += step
            e_plus = flow_energy(y, x, probe, w, lam).total
            field[idx] -= 2 * step
            e_minus = flow_energy(y, x, probe, w, lam).total
            fd[comp][idx] = (e_plus - e_minus) / (2 * step)
    diff = max(np.max(np.abs(gu - fd[0])), np.max(np.abs(gv - fd[1])))
    scale = max(np.max(np.abs(fd[0])), np.max(np.abs(fd[1])))
    if scale == 0.0:
        return float(diff)
    return float(diff / scale)


# -- pyramid helpers ---------------------------------------------------------

def _pyramid_shapes(shape, scale: float, min_size: int):
    shapes = [tuple(shape)]
    while True:
        h, w = shapes[-1]
        nh, nw = int(round(h * scale)), int(round(w * scale))
        if min(nh, nw) < min_size or (nh, nw) == (h, w):
            return shapes
        shapes.append((nh, nw))


def _resize(arr: np.ndarray, shape) -> np.ndarray:
    if arr.shape[:2] == tuple(shape):
        return arr.copy()
    zoom = (shape[0] / arr.shape[0], shape[1] / arr.shape[1]) + (1,) * (arr.ndim - 2)
    out = ndimage.zoom(arr, zoom, order=1, mode="nearest", grid_mode=True)
    return out[: shape[0], : shape[1]]


def _downsample(arr: np.ndarray, shape, sigma: float) -> np.ndarray:
    sig = (sigma, sigma) + (0,) * (arr.ndim - 2)
    return _resize(ndimage.gaussian_filter(arr, sig, mode="nearest"), shape)


def _resize_flow(flow: FlowField, shape) -> FlowField:
    if flow.shape == tuple(shape):
        return flow.copy()
    sy = shape[0] / flow.shape[0]
    sx = shape[1] / flow.shape[1]
    return FlowField(_resize(flow.u, shape) * sx, _resize(flow.v, shape) * sy)


# -- single-level solver -----------------------------------------------------

class _Level:
    """Quadratic model pieces that depend only on the weights."""

    def __init__(self, w: np.ndarray):
        self.wx = w[:, :-1]
        self.wy = w[:-1, :]
        deg = np.zeros_like(w)
        deg[:, :-1] += self.wx
        deg[:, 1:] += self.wx
        deg[:-1, :] += self.wy
        deg[1:, :] += self.wy
        self.degree = deg

    def neighbor_sum(self, f: np.ndarray) -> np.ndarray:
        nb = np.zeros_like(f)
        nb[:, :-1] += self.wx * f[:, 1:]
        nb[:, 1:] += self.wx * f[:, :-1]
        nb[:-1, :] += self.wy * f[1:, :]
        nb[1:, :] += self.wy * f[:-1, :]
        return nb

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.degree * f - self.neighbor_sum(f)


def _channel_sum(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=2) if a.ndim == 3 else a


@numba.njit(cache=True)
def _red_black_sor(du, dv, a11, a12, a22, b1, b2, wx, wy, mu, omega, iterations):
    """In-place block SOR sweeps over the 2x2 per-pixel systems.

    Red pixels are updated first, then black; within one colour no pixel
    depends on another, so the result is independent of traversal order.
    """
    h, w = du.shape
    for _ in range(iterations):
        for color in range(2):
            for i in range(h):
                for j in range((i + color) % 2, w, 2):
                    nu_ = 0.0
                    nv_ = 0.0
                    if j < w - 1:
                        nu_ += wx[i, j] * du[i, j + 1]
                        nv_ += wx[i, j] * dv[i, j + 1]
                    if j > 0:
                        nu_ += wx[i, j - 1] * du[i, j - 1]
                        nv_ += wx[i, j - 1] * dv[i, j - 1]
                    if i < h - 1:
                        nu_ += wy[i, j] * du[i + 1, j]
                        nv_ += wy[i, j] * dv[i + 1, j]
                    if i > 0:
                        nu_ += wy[i - 1, j] * du[i - 1, j]
                        nv_ += wy[i - 1, j] * dv[i - 1, j]
                    r1 = b1[i, j] + mu * nu_
                    r2 = b2[i, j] + mu * nv_
                    det = a11[i, j] * a22[i, j] - a12[i, j] * a12[i, j]
                    su = (a22[i, j] * r1 - a12[i, j] * r2) / det
                    sv = (a11[i, j] * r2 - a12[i, j] * r1) / det
                    du[i, j] += omega * (su - du[i, j])
                    dv[i, j] += omega * (sv - dv[i, j])


def _solve_increment(lvl: _Level, flow: FlowField, wy, ix, iy, x, mu, params, du, dv):
    """Relax the linearized normal equations for the increment ``(du, dv)``."""
    base = np.clip(wy, 0.0, 1.0)
    lu0 = lvl.laplacian(flow.u)
    lv0 = lvl.laplacian(flow.v)
    inner = params.inner_iterations if params.robust_data else 1
    # keeps the 2x2 blocks invertible when lam = 0 and the image is flat
    reg = 1e-9
    for _ in range(inner):
        if params.robust_data:
            ex = (lambda a: a[..., None]) if x.ndim == 3 else (lambda a: a)
            r = base + ix * ex(du) + iy * ex(dv)
            phi = 1.0 / np.sqrt((r - x) ** 2 + params.charbonnier_eps ** 2)
        else:
            phi = 1.0
        a11 = _channel_sum(phi * ix * ix) + mu * lvl.degree + reg
        a22 = _channel_sum(phi * iy * iy) + mu * lvl.degree + reg
        a12 = _channel_sum(phi * ix * iy)
        b1 = _channel_sum(phi * ix * (x - base)) - mu * lu0
        b2 = _channel_sum(phi * iy * (x - base)) - mu * lv0
        du, dv = du.copy(), dv.copy()
        _red_black_sor(du, dv, a11, a12, a22, b1, b2, lvl.wx, lvl.wy, mu,
                       params.sor_omega, params.solver_iterations)
    return du, dv


def _refine_level(y, x, w, flow: FlowField, params: FlowParams, history=None, level=0):
    mu = effective_lambda(params.lam)
    lvl = _Level(w)
    energy = flow_energy(y, x, flow, w, params.lam).total
    if history is not None:
        history.append((level, 0, energy))
    for it in range(1, params.outer_iterations + 1):
        wy, ix, iy = warp_unclamped(y, flow, gradient=True)
        active = (wy >= 0.0) & (wy <= 1.0)
        ix = ix * active
        iy = iy * active
        zeros = np.zeros(flow.shape)
        du, dv = _solve_increment(lvl, flow, wy, ix, iy, x, mu, params, zeros, zeros.copy())
        t = 1.0
        accepted = None
        for _ in range(params.max_halvings + 1):
            cand = FlowField(flow.u + t * du, flow.v + t * dv)
            e = flow_energy(y, x, cand, w, params.lam).total
            if e <= energy:
                accepted = (cand, e)
                break
            t *= 0.5
        if accepted is None:
            log.debug("level %d: no descent step at outer iteration %d", level, it)
            break
        flow, e_new = accepted
        improved = energy - e_new
        energy = e_new
        if history is not None:
            history.append((level, it, energy))
        if improved <= 1e-12 * max(energy, 1e-300):
            break
    return flow, energy


def estimate_flow(y, x, w=None, params: FlowParams | None = None, init: FlowField | None = None,
                  history: list | None = None) -> FlowField:
    """Flow warping ``y`` onto ``x``, refined coarse to fine from ``init``.

    The returned flow never has higher energy than ``init`` (identity when
    omitted).  ``history``, if given, receives ``(level, iteration, energy)``
    tuples; level 0 is the finest.
    """
    params = params or FlowParams()
    y, x, w = _prepare(y, x, init, w)
    init = init if init is not None else FlowField.identity(y.shape)
    if params.lam < params.continuation_lam:
        # weak regularization leaves the linearized systems nearly singular;
        # the flow for a larger lam is a feasible start with no higher energy
        stiff = dataclasses.replace(params, lam=params.continuation_lam)
        start = _coarse_to_fine(y, x, w, stiff, init, None)
        if flow_energy(y, x, init, w, params.lam).total < flow_energy(y, x, start, w, params.lam).total:
            start = init
        flow, _ = _refine_level(y, x, w, start, params, history, 0)
        return flow
    return _coarse_to_fine(y, x, w, params, init, history)


def _coarse_to_fine(y, x, w, params: FlowParams, init: FlowField, history) -> FlowField:
    shapes = _pyramid_shapes(y.shape[:2], params.pyramid_scale, params.min_size)

    ys, xs, ws = [y], [x], [w]
    for shp in shapes[1:]:
        ys.append(_downsample(ys[-1], shp, params.presmooth_sigma))
        xs.append(_downsample(xs[-1], shp, params.presmooth_sigma))
        ws.append(_downsample(ws[-1], shp, params.presmooth_sigma))

    flow = _resize_flow(init, shapes[-1])
    for level in range(len(shapes) - 1, 0, -1):
        flow, _ = _refine_level(ys[level], xs[level], ws[level], flow, params, None, level)
        flow = _resize_flow(flow, shapes[level - 1])

    # the coarse solution may be worse than the caller's start at full size
    if len(shapes) > 1:
        e_coarse = flow_energy(y, x, flow, w, params.lam).total
        e_init = flow_energy(y, x, init, w, params.lam).total
        if e_init <= e_coarse:
            flow = init.copy()
    flow, _ = _refine_level(y, x, w, flow, params, history, 0)
    return flow
