"""Deformation-aware SSD (DASSD).

``dassd(x, y)`` is the smallest flow energy found when warping ``y`` onto
``x``: the SSD after warping plus the weighted smoothness penalty of the
flow.  The argument order matters; the measure is not symmetric.  The value
is the solver's local minimum, so it upper-bounds the true minimum, and it
never exceeds ``ssd(x, y)`` because the identity flow is always a candidate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowEnergy, FlowParams, effective_lambda, estimate_flow, flow_energy
from .image import as_image, check_same_shape, ssd
from .warp import FlowField


@dataclass
class DassdResult:
    dassd: float
    ssd: float
    energy: FlowEnergy
    flow: FlowField

    @property
    def flow_penalty(self) -> float:
        """Weighted smoothness contribution, ``dassd - data_term``."""
        return effective_lambda(self.energy.lam) * self.energy.smoothness_term


def dassd(x, y, w=None, params: FlowParams | None = None, init: FlowField | None = None) -> DassdResult:
    """DASSD of ``x`` against reference ``y`` (``y`` is warped onto ``x``).

    The flow is estimated from the identity; when ``init`` is given it is
    also refined from there and the lower of the two energies is kept.
    """
    x = as_image(x)
    y = as_image(y)
    check_same_shape(x, y)
    params = params or FlowParams()
    starts = [None] if init is None else [None, init]
    best = None
    for start in starts:
        flow = estimate_flow(y, x, w, params, init=start)
        energy = flow_energy(y, x, flow, w, params.lam)
        if best is None or energy.total < best[0].total:
            best = (energy, flow)
    energy, flow = best
    return DassdResult(energy.total, ssd(x, y), energy, flow)


def dassd_ratio(result: DassdResult) -> float:
    return result.dassd / result.ssd if result.ssd > 0 else float(np.nan)
