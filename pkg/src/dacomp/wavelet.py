"""Orthonormal Haar pyramid and the two thresholding codecs built on it.

The rate of these codecs is a coefficient budget: compression ratio N:1
means keeping ``ceil(total / N)`` coefficients.  Nothing is entropy coded.

Odd-length axes are handled by symmetric (half-sample) extension.  For the
Haar pair this makes the detail coefficient of the trailing pair identically
zero, so it is not stored and the trailing sample is carried into the
approximation band with unit gain.  The transform stays orthonormal and the
coefficient count equals the sample count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .image import as_image

SQRT2 = math.sqrt(2.0)
DEFAULT_LEVELS = 4
SUBBANDS = ("LH", "HL", "HH")


@dataclass(frozen=True)
class ThresholdBudget:
    """Fraction of wavelet coefficients a built-in codec may keep."""

    kept_fraction: float

    def __post_init__(self):
        if not (0.0 < self.kept_fraction <= 1.0):
            raise ValueError(f"kept_fraction must lie in (0, 1], got {self.kept_fraction}")

    @classmethod
    def from_ratio(cls, ratio: float) -> "ThresholdBudget":
        if ratio < 1:
            raise ValueError(f"compression ratio must be >= 1, got {ratio}")
        return cls(1.0 / ratio)

    @property
    def ratio(self) -> float:
        return 1.0 / self.kept_fraction

    def kept_count(self, total: int) -> int:
        # the tiny slack absorbs float error in e.g. 0.1 * 2560
        return max(1, math.ceil(self.kept_fraction * total - 1e-9))


@dataclass
class WaveletPyramid:
    """Multilevel 2-D Haar decomposition.

    ``details[0]`` is the finest level.  Each level maps subband name to an
    array; the first letter is the filter along x (columns), the second
    along y (rows), so ``HL`` responds to vertical edges.
    """

    approx: np.ndarray
    details: list = field(default_factory=list)
    shape: tuple = ()

    @property
    def levels(self) -> int:
        return len(self.details)

    def bands(self):
        """Yield ``(name, array)`` in canonical order: LL, then coarse to fine."""
        yield "LL", self.approx
        for lev in range(self.levels, 0, -1):
            for name in SUBBANDS:
                yield f"{name}{lev}", self.details[lev - 1][name]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for _, b in self.bands()])

    def with_vector(self, vec: np.ndarray) -> "WaveletPyramid":
        """Copy of this pyramid with coefficients replaced from ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ValueError("coefficient vector does not match pyramid layout")
        pos = 0

        def take(shape):
            nonlocal pos
            n = int(np.prod(shape))
            out = vec[pos:pos + n].reshape(shape)
            pos += n
            return out

        approx = take(self.approx.shape)
        details = [None] * self.levels
        for lev in range(self.levels, 0, -1):
            details[lev - 1] = {
                name: take(self.details[lev - 1][name].shape) for name in SUBBANDS
            }
        return WaveletPyramid(approx, details, self.shape)

    @property
    def size(self) -> int:
        return sum(b.size for _, b in self.bands())


def _analyze(x: np.ndarray, axis: int):
    n = x.shape[axis]
    m = n // 2
    x = np.moveaxis(x, axis, 0)
    even, odd = x[0:2 * m:2], x[1:2 * m:2]
    lo = (even + odd) / SQRT2
    hi = (even - odd) / SQRT2
    if n % 2:
        lo = np.concatenate([lo, x[n - 1:n]], axis=0)
    return np.moveaxis(lo, 0, axis), np.moveaxis(hi, 0, axis)


def _synthesize(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    lo = np.moveaxis(lo, axis, 0)
    hi = np.moveaxis(hi, axis, 0)
    m = hi.shape[0]
    if lo.shape[0] not in (m, m + 1):
        raise ValueError("malformed pyramid: band lengths disagree")
    n = 2 * m + (lo.shape[0] - m)
    out = np.empty((n,) + lo.shape[1:], dtype=np.float64)
    out[0:2 * m:2] = (lo[:m] + hi) / SQRT2
    out[1:2 * m:2] = (lo[:m] - hi) / SQRT2
    if n % 2:
        out[n - 1] = lo[m]
    return np.moveaxis(out, 0, axis)


def max_levels(shape) -> int:
    return int(math.floor(math.log2(min(shape[0], shape[1]))))


def dwt_forward(img, levels: int = DEFAULT_LEVELS) -> WaveletPyramid:
    img = as_image(img)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = img.shape[:2]
    if min(h, w) < 2 ** levels:
        raise ValueError(f"levels={levels} too large for a {h}x{w} image")
    details = []
    ll = img
    for _ in range(levels):
        lo_x, hi_x = _analyze(ll, axis=1)
        ll, lh = _analyze(lo_x, axis=0)
        hl, hh = _analyze(hi_x, axis=0)
        details.append({"LH": lh, "HL": hl, "HH": hh})
    return WaveletPyramid(ll, details, img.shape)


def dwt_inverse(pyr: WaveletPyramid) -> np.ndarray:
    if pyr.levels < 1:
        raise ValueError("malformed pyramid: no detail levels")
    ll = pyr.approx
    for lev in range(pyr.levels, 0, -1):
        d = pyr.details[lev - 1]
        try:
            lo_x = _synthesize(ll, d["LH"], axis=0)
            hi_x = _synthesize(d["HL"], d["HH"], axis=0)
            ll = _synthesize(lo_x, hi_x, axis=1)
        except (KeyError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed pyramid at level {lev}") from exc
    if pyr.shape and ll.shape != tuple(pyr.shape):
        raise ValueError(f"malformed pyramid: reconstructed {ll.shape}, expected {pyr.shape}")
    return ll


def top_k_mask(values: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` largest ``|values|``; ties go to the lower index."""
    mask = np.zeros(values.shape, dtype=bool)
    if k <= 0:
        return mask
    order = np.argsort(-np.abs(values), kind="stable")
    mask[order[:k]] = True
    return mask


def global_threshold(img, budget: ThresholdBudget, levels: int = DEFAULT_LEVELS):
    """Global thresholding; returns ``(decoded, retained_nonzero_count)``."""
    pyr = dwt_forward(img, levels)
    vec = pyr.to_vector()
    kept = np.where(top_k_mask(vec, budget.kept_count(vec.size)), vec, 0.0)
    return dwt_inverse(pyr.with_vector(kept)), int(np.count_nonzero(kept))


def compress_global_threshold(img, budget: ThresholdBudget, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Keep the K largest-magnitude coefficients over all bands and channels."""
    return global_threshold(img, budget, levels)[0]


def subband_allocation(pyr: WaveletPyramid, budget: ThresholdBudget) -> dict:
    """Per-detail-band keep counts, proportional to band energy.

    The LL band is kept whole and its size is charged to the budget first.
    Each band gets ``max(1, round(share))`` capped at its size; share a
    full band cannot use moves to the others, and whatever rounding leaves
    unspent goes to the bands with the largest remainders.
    """
    total = pyr.size
    k_detail = budget.kept_count(total) - pyr.approx.size
    if k_detail < 0:
        raise ValueError(
            f"budget of {budget.kept_count(total)} coefficients is below the LL band size "
            f"{pyr.approx.size}; use fewer levels or a larger budget"
        )
    bands = [(name, b) for name, b in pyr.bands() if name != "LL"]
    energy = {name: float(np.sum(b * b)) for name, b in bands}
    size = {name: b.size for name, b in bands}

    # energy-proportional shares; a band's share beyond its size is passed on
    share = dict.fromkeys(size, 0.0)
    open_bands, left = list(size), float(k_detail)
    while open_bands and left > 0:
        e_open = sum(energy[n] for n in open_bands)
        if e_open <= 0:
            break
        capped = [n for n in open_bands if left * energy[n] / e_open >= size[n]]
        if not capped:
            for n in open_bands:
                share[n] = left * energy[n] / e_open
            break
        for n in capped:
            share[n] = float(size[n])
            left -= size[n]
            open_bands.remove(n)

    alloc = {n: min(size[n], max(1, int(math.floor(share[n] + 0.5)))) for n in size}
    # rounding leftovers go to the largest remainders, canonical band order on ties
    deficit = k_detail - sum(alloc.values())
    if deficit > 0:
        spare = sorted((n for n in size if alloc[n] < size[n]),
                       key=lambda n: alloc[n] - share[n])
        while deficit > 0 and spare:
            for n in list(spare):
                if deficit == 0:
                    break
                grant = min(deficit, size[n] - alloc[n], max(1, int(math.ceil(share[n] - alloc[n]))))
                alloc[n] += grant
                deficit -= grant
                if alloc[n] == size[n]:
                    spare.remove(n)
    return alloc


def subband_threshold(img, budget: ThresholdBudget, levels: int = DEFAULT_LEVELS):
    """Subband thresholding; returns ``(decoded, retained_nonzero_count)``.

    Band allocations can overshoot the budget through rounding and the
    one-coefficient floor; the overshoot is trimmed by dropping the smallest
    retained detail coefficients, so the nonzero count never exceeds it.
    """
    pyr = dwt_forward(img, levels)
    alloc = subband_allocation(pyr, budget)
    masks = [np.ones(pyr.approx.size, dtype=bool)]
    for name, b in pyr.bands():
        if name != "LL":
            masks.append(top_k_mask(b.ravel(), alloc[name]))
    vec = pyr.to_vector()
    kept = np.where(np.concatenate(masks), vec, 0.0)

    limit = budget.kept_count(vec.size)
    n_ll = pyr.approx.size
    if np.count_nonzero(kept) > limit:
        detail = kept[n_ll:]
        detail_keep = top_k_mask(detail, limit - np.count_nonzero(kept[:n_ll]))
        kept = np.concatenate([kept[:n_ll], np.where(detail_keep, detail, 0.0)])
    return dwt_inverse(pyr.with_vector(kept)), int(np.count_nonzero(kept))


def compress_subband_threshold(img, budget: ThresholdBudget, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Keep the top coefficients of each detail band, LL untouched."""
    return subband_threshold(img, budget, levels)[0]
